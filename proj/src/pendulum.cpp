#include "chaosbench/io.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

namespace chaosbench {

namespace {

// Angle of `b − a` from the screen-down direction; image y grows downward, so
// a swing toward +x is counterclockwise as seen on screen.
Vector arm_angles(const Matrix& a, const Matrix& b, const char* label) {
    Vector theta(a.rows());
    for (Index f = 0; f < a.rows(); ++f) {
        const double dx = b(f, 0) - a(f, 0), dy = b(f, 1) - a(f, 1);
        if (dx == 0.0 && dy == 0.0)
            throw DegenerateFrame(std::string("pendulum: coincident ") + label + " points at frame " + std::to_string(f),
                                  static_cast<std::size_t>(f));
        theta(f) = std::atan2(dx, dy);
    }
    // Remove ±2π jumps.
    double offset = 0.0, prev = theta(0);
    for (Index f = 1; f < theta.size(); ++f) {
        const double wrapped = theta(f);
        const double step = wrapped - prev;
        if (step > M_PI) offset -= 2.0 * M_PI * std::round(step / (2.0 * M_PI));
        else if (step < -M_PI) offset += 2.0 * M_PI * std::round(-step / (2.0 * M_PI));
        prev = wrapped;
        theta(f) = wrapped + offset;
    }
    return theta;
}

}  // namespace

Trajectory ingest_pendulum(const PendulumRaw& raw) {
    const Index frames = raw.pivot.rows();
    if (raw.pivot.cols() != 2 || raw.hinge.cols() != 2 || raw.tip.cols() != 2 || raw.hinge.rows() != frames ||
        raw.tip.rows() != frames)
        throw InvalidArgument("pendulum: pivot, hinge and tip must be F×2 with equal F");
    if (frames < 6) throw InvalidArgument("pendulum: need at least 6 frames");
    if (!(raw.fps > 0.0)) throw InvalidArgument("pendulum: fps must be positive");
    if (!raw.pivot.allFinite() || !raw.hinge.allFinite() || !raw.tip.allFinite())
        throw InvalidArgument("pendulum: non-finite coordinates");

    const Vector t1 = arm_angles(raw.pivot, raw.hinge, "pivot/hinge");
    const Vector t2 = arm_angles(raw.hinge, raw.tip, "hinge/tip");

    // Central differences on interior frames 1..F−2, then every third of those.
    const Index interior = frames - 2;
    const Index n = (interior + 2) / 3;
    Matrix out(n, 4);
    for (Index i = 0; i < n; ++i) {
        const Index f = 1 + 3 * i;
        out(i, 0) = t1(f);
        out(i, 1) = t2(f);
        out(i, 2) = (t1(f + 1) - t1(f - 1)) * raw.fps / 2.0;
        out(i, 3) = (t2(f + 1) - t2(f - 1)) * raw.fps / 2.0;
    }

    Trajectory traj;
    traj.values = std::move(out);
    traj.dt = 3.0 / raw.fps;
    traj.dt_lyap = traj.dt;  // seconds until a Lyapunov time is supplied
    traj.t0 = 1.0 / raw.fps;
    traj.system = "double_pendulum";
    return traj;
}

PendulumRaw read_pendulum_csv(const std::string& path, double fps) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw InvalidArgument(path + ": empty file");
    std::vector<std::array<double, 6>> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        std::stringstream ss(line);
        std::array<double, 6> row{};
        std::string cell;
        for (std::size_t c = 0; c < 6; ++c) {
            if (!std::getline(ss, cell, ','))
                throw InvalidArgument(path + ":" + std::to_string(lineno) + ": expected 6 columns");
            try {
                row[c] = std::stod(cell);
            } catch (const std::exception&) {
                throw InvalidArgument(path + ":" + std::to_string(lineno) + ": not a number: '" + cell + "'");
            }
        }
        rows.push_back(row);
    }
    PendulumRaw raw;
    raw.fps = fps;
    const Index f = static_cast<Index>(rows.size());
    raw.pivot.resize(f, 2);
    raw.hinge.resize(f, 2);
    raw.tip.resize(f, 2);
    for (Index i = 0; i < f; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        raw.pivot.row(i) << r[0], r[1];
        raw.hinge.row(i) << r[2], r[3];
        raw.tip.row(i) << r[4], r[5];
    }
    return raw;
}

}  // namespace chaosbench
