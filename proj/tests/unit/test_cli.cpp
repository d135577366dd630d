#include "support.hpp"

#include "chaosbench/io.hpp"

#include <doctest.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace chaosbench;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out;
};

Result cli(const std::string& args) {
    const std::string cmd = std::string(CHAOSBENCH_CLI) + " " + args + " 2>/dev/null";
    Result r;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf{};
    std::size_t n;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string fixture(const std::string& mode) {
    return "'python3 " FIXTURE_DIR "/fixture_adapter.py " + mode + "'";
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST_CASE("cli rejects bad configs with exit code 2") {
    const auto dir = testing::scratch_dir("cli-config");
    write(dir / "broken.json", "{\"n_ics\": 2,\n \"seed\": }\n");
    write(dir / "unknown.json", R"({"n_icz": 2})");
    write(dir / "invalid.json", R"({"horizon": 0})");
    for (const char* f : {"broken.json", "unknown.json", "invalid.json"})
        CHECK(cli("run " + (dir / f).string() + " --out " + (dir / "out").string()).code == 2);
    CHECK(cli("run " + (dir / "absent.json").string()).code == 2);
    CHECK(cli("no-such-command").code != 0);
}

TEST_CASE("cli report") {
    const auto dir = testing::scratch_dir("cli-report");
    const auto path = (dir / "records.jsonl").string();
    {
        RecordAppender out(path);
        for (auto [model, vpt] : {std::pair{"naive", 0.1}, {"parrot", 0.9}, {"naive", 0.3}}) {
            ResultRecord r;
            r.system = "lorenz";
            r.model_id = model;
            r.metrics.vpt_lyap = vpt;
            r.metrics.smape_curve = Vector::Constant(4, 50.0);
            r.harness_version = harness_version();
            out.append(r);
        }
    }
    const Result r = cli("report " + path + " --format csv --curves " + (dir / "curves.csv").string());
    CHECK(r.code == 0);
    std::istringstream lines(r.out);
    std::string line;
    std::vector<std::string> rows;
    while (std::getline(lines, line)) rows.push_back(line);
    REQUIRE(rows.size() == 3);
    CHECK(rows[1].rfind("naive,2,0,0.2,", 0) == 0);
    CHECK(rows[2].rfind("parrot,1,0,0.9,", 0) == 0);
    CHECK(fs::file_size(dir / "curves.csv") > 0);

    CHECK(cli("report " + path + " --format md --group-by system,model_id").out.find("| lorenz | naive |") !=
          std::string::npos);
}

TEST_CASE("cli runs are reproducible") {
    const auto dir = testing::scratch_dir("cli-run");
    write(dir / "cfg.json", R"({"systems": ["lorenz"], "n_ics": 2, "models": ["naive", "parrot"], "seed": 13})");
    const auto cfg = (dir / "cfg.json").string();
    REQUIRE(cli("run " + cfg + " --threads 1 --out " + (dir / "a").string()).code == 0);
    REQUIRE(cli("run " + cfg + " --threads 3 --out " + (dir / "b").string()).code == 0);
    const auto a = load_records((dir / "a" / "records.jsonl").string());
    const auto b = load_records((dir / "b" / "records.jsonl").string());
    REQUIRE(a.records.size() == 12);
    REQUIRE(b.records.size() == a.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i)
        CHECK(record_payload(a.records[i]) == record_payload(b.records[i]));

    std::ifstream m(dir / "a" / "manifest.json");
    const auto manifest = manifest_from_json(nlohmann::json::parse(m));
    CHECK(manifest.record_count == 12);
    CHECK(manifest.master_seed == 13);
    CHECK(manifest.config_hash == config_hash(load_experiment_config(cfg)));
    CHECK(manifest.registry_checksum == testing::registry().checksum());
}

TEST_CASE("cli integrate writes trajectories") {
    const auto dir = testing::scratch_dir("cli-integrate");
    const Result r = cli("integrate lorenz --ics 2 --length 100 --seed 4 --out " + dir.string());
    CHECK(r.code == 0);
    TrajectoryMeta meta;
    const Trajectory t = read_trajectory_csv((dir / "lorenz_ic1.csv").string(), &meta);
    CHECK(t.length() == 100);
    CHECK(t.dim() == 3);
    CHECK(meta.seed == 4);
    CHECK(meta.ic_index == 1);
}

TEST_CASE("cli serve-check") {
    const Result good = cli("serve-check " + fixture("naive"));
    CHECK(good.code == 0);
    CHECK(good.out.find("PASS naive matches in-core naive") != std::string::npos);
    CHECK(good.out.find("FAIL") == std::string::npos);

    const Result bad = cli("serve-check " + fixture("short"));
    CHECK(bad.code == 3);
    CHECK(bad.out.find("FAIL") != std::string::npos);
    CHECK(cli("serve-check " + fixture("hang") + " --timeout 0.5").code == 3);
}
