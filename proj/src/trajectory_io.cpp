#include "chaosbench/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace chaosbench {

using nlohmann::json;

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        if (!cell.empty() && cell.back() == '\r') cell.pop_back();
        out.push_back(cell);
    }
    return out;
}

double parse_number(const std::string& cell, const std::string& path, std::size_t line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
        return v;
    } catch (const std::exception&) {
        throw InvalidArgument(path + ":" + std::to_string(line) + ": not a number: '" + cell + "'");
    }
}

}  // namespace

void write_trajectory_csv(const Trajectory& traj, const TrajectoryMeta& meta, const std::string& path) {
    traj.validate();
    std::ofstream out(path);
    if (!out) throw InvalidArgument("cannot write " + path);
    out << "t_lyap";
    for (Index c = 0; c < traj.dim(); ++c) out << ",x" << c;
    out << '\n';
    for (Index t = 0; t < traj.length(); ++t) {
        out << fmt(traj.t0 + static_cast<double>(t) * traj.dt_lyap);
        for (Index c = 0; c < traj.dim(); ++c) out << ',' << fmt(traj.values(t, c));
        out << '\n';
    }

    json side = meta.extra.is_object() ? meta.extra : json::object();
    side["system"] = meta.system.empty() ? traj.system.value_or("") : meta.system;
    side["seed"] = meta.seed;
    side["ic_index"] = meta.ic_index;
    side["granularity"] = meta.granularity;
    side["dt_lyap"] = traj.dt_lyap;
    side["dt"] = traj.dt;
    side["t0_lyap"] = traj.t0;
    side["length"] = traj.length();
    side["dim"] = traj.dim();
    side["harness_version"] = meta.harness_version.empty() ? harness_version() : meta.harness_version;
    std::ofstream sidecar(path + ".meta.json");
    if (!sidecar) throw InvalidArgument("cannot write " + path + ".meta.json");
    sidecar << side.dump(2) << '\n';
}

Trajectory read_trajectory_csv(const std::string& path, TrajectoryMeta* meta) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw InvalidArgument(path + ": empty file");
    const auto header = split_csv(line);
    if (header.size() < 2 || header[0] != "t_lyap") throw InvalidArgument(path + ": header must start with t_lyap");
    const std::size_t d = header.size() - 1;

    std::vector<double> times;
    std::vector<double> flat;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != d + 1)
            throw InvalidArgument(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(d + 1) + " columns");
        times.push_back(parse_number(cells[0], path, lineno));
        for (std::size_t c = 1; c <= d; ++c) flat.push_back(parse_number(cells[c], path, lineno));
    }

    Trajectory traj;
    const Index n = static_cast<Index>(times.size());
    traj.values = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        flat.data(), n, static_cast<Index>(d));
    traj.t0 = n > 0 ? times.front() : 0.0;

    TrajectoryMeta m;
    std::ifstream side(path + ".meta.json");
    if (side) {
        const json j = json::parse(side);
        m.system = j.value("system", "");
        m.seed = j.value("seed", Seed{0});
        m.ic_index = j.value("ic_index", 0);
        m.granularity = j.value("granularity", 30);
        m.dt_lyap = j.value("dt_lyap", 1.0 / m.granularity);
        m.harness_version = j.value("harness_version", "");
        m.extra = j;
        traj.dt = j.value("dt", 0.0);
        if (!m.system.empty()) traj.system = m.system;
    }
    traj.dt_lyap = n >= 2 ? (times.back() - times.front()) / static_cast<double>(n - 1) : m.dt_lyap;
    if (side) traj.dt_lyap = m.dt_lyap;  // exact value; the time column is rounded text
    if (traj.dt == 0.0) traj.dt = traj.dt_lyap;
    traj.validate();
    if (meta) *meta = m;
    return traj;
}

}  // namespace chaosbench
