// End-to-end tests that drive the installed `aal` binary through its
// subcommands. The binary path arrives as the first program argument.
#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

std::string g_binary;

namespace fs = std::filesystem;

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr interleaved
};

RunResult run(const std::string& args) {
    const std::string cmd = g_binary + " " + args + " 2>&1";
    std::array<char, 4096> buf;
    std::string out;
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    std::size_t n;
    while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) out.append(buf.data(), n);
    const int status = pclose(p);
    RunResult r;
    r.output = out;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

void spit(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    REQUIRE(f.good());
    f << text;
}

std::size_t count_lines(const std::string& text) {
    std::size_t n = 0;
    for (char c : text) n += (c == '\n');
    return n;
}

// Shared fixture directory with a zone map, a scenario, and the files each
// stage produces; built once and reused so the pipeline stages chain.
struct Workspace {
    fs::path dir;

    Workspace() {
        dir = fs::temp_directory_path() /
              ("aal_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(dir);
        spit(map(),
             "bedroom\tBedroom\t0\t0\t4\t4\n"
             "kitchen\tKitchen\t4\t0\t8\t4\n"
             "office\tOffice\t0\t4\t4\t8\n"
             "toilet\tToilet\t4\t4\t8\t8\n");
        spit(scenario(),
             "@rate 50\n"
             "@noise_g 0.03\n"
             "@noise_dps 2\n"
             "@seed 21\n"
             "Standing\t15\tbedroom\n"
             "Walking\t15\tkitchen\n"
             "FallForward\t1\tkitchen\n"
             "LyingDown\t5\tkitchen\n"
             "GettingUp\t4\tkitchen\n"
             "Sitting\t15\toffice\n"
             "FallSideways\t1\toffice\n"
             "LyingDown\t5\toffice\n"
             "GettingUp\t4\toffice\n"
             "Walking\t10\ttoilet\n"
             "FallForward\t1\ttoilet\n"
             "LyingDown\t5\ttoilet\n"
             "GettingUp\t4\ttoilet\n"
             "Standing\t10\tbedroom\n"
             "FallSideways\t1\tbedroom\n"
             "LyingDown\t5\tbedroom\n"
             "GettingUp\t4\tbedroom\n"
             "Walking\t10\tkitchen\n"
             "FallForward\t1\tkitchen\n"
             "LyingDown\t5\tkitchen\n"
             "Standing\t10\toffice\n"
             "FallSideways\t1\toffice\n"
             "LyingDown\t5\toffice\n");
    }
    ~Workspace() { fs::remove_all(dir); }

    fs::path map() const { return dir / "zones.tsv"; }
    fs::path scenario() const { return dir / "scenario.tsv"; }
    std::string p(const std::string& name) const { return (dir / name).string(); }
};

Workspace& ws() {
    static Workspace w;
    return w;
}

std::string common() {
    return "--zone-map " + ws().map().string() + " ";
}

}  // namespace

TEST_CASE("usage errors exit 1") {
    CHECK(run("").exit_code == 1);
    CHECK(run("frobnicate").exit_code == 1);
    CHECK(run("simulate").exit_code == 1);  // missing required options
}

TEST_CASE("unreadable input exits 2") {
    const auto r = run("export " + common() + "--log " + ws().p("absent.log") +
                       " --out " + ws().p("absent.csv"));
    CHECK(r.exit_code == 1);  // CLI11 ExistingFile check fires first

    spit(ws().dir / "garbage.log", "not a session log");
    const auto r2 = run("export " + common() + "--log " + ws().p("garbage.log") +
                        " --out " + ws().p("garbage.csv"));
    CHECK(r2.exit_code == 2);
}

TEST_CASE("simulate is deterministic and reports its seed") {
    const std::string cmd = "simulate " + common() + "--scenario " +
                            ws().scenario().string() + " --out ";
    const auto r1 = run(cmd + ws().p("a"));
    REQUIRE(r1.exit_code == 0);
    CHECK(r1.output.find("seed: 21") != std::string::npos);
    const auto r2 = run(cmd + ws().p("b"));
    REQUIRE(r2.exit_code == 0);

    CHECK(slurp(ws().dir / "a.imu.jsonl") == slurp(ws().dir / "b.imu.jsonl"));
    CHECK(slurp(ws().dir / "a.beacon.jsonl") == slurp(ws().dir / "b.beacon.jsonl"));
    CHECK(slurp(ws().dir / "a.truth.txt") == slurp(ws().dir / "b.truth.txt"));

    // A seed override changes the sample noise.
    const auto r3 = run(cmd + ws().p("c") + " --seed 99");
    REQUIRE(r3.exit_code == 0);
    CHECK(r3.output.find("seed: 99") != std::string::npos);
    CHECK(slurp(ws().dir / "c.imu.jsonl") != slurp(ws().dir / "a.imu.jsonl"));
}

TEST_CASE("ingest then export reproduces one row per IMU frame") {
    const auto r = run("ingest " + common() + "--imu " + ws().p("a.imu.jsonl") +
                       " --beacon " + ws().p("a.beacon.jsonl") + " --out " +
                       ws().p("a.log"));
    REQUIRE(r.exit_code == 0);
    const std::size_t frames = count_lines(slurp(ws().dir / "a.imu.jsonl"));
    CHECK(r.output.find("records: " + std::to_string(frames)) !=
          std::string::npos);

    const auto e = run("export " + common() + "--log " + ws().p("a.log") +
                       " --out " + ws().p("a.csv"));
    REQUIRE(e.exit_code == 0);
    const auto csv = slurp(ws().dir / "a.csv");
    CHECK(count_lines(csv) == frames + 1);  // header
    CHECK(csv.rfind("wall_clock,t_ms,elapsed_s,", 0) == 0);
    CHECK(csv.find("bedroom,kitchen,office,toilet") != std::string::npos);
}

TEST_CASE("plot-data emits a per-axis series") {
    const auto r = run("plot-data --log " + ws().p("a.log") + " --out " +
                       ws().p("a.plot.csv"));
    REQUIRE(r.exit_code == 0);
    const auto csv = slurp(ws().dir / "a.plot.csv");
    CHECK(csv.rfind("t_ms,accel_x", 0) == 0);
    CHECK(count_lines(csv) == count_lines(slurp(ws().dir / "a.imu.jsonl")) + 1);
}

TEST_CASE("train, detect, eval round trip") {
    const auto tf = run("train-fall --imu " + ws().p("a.imu.jsonl") +
                        " --truth " + ws().p("a.truth.txt") + " --out " +
                        ws().p("fall.model") + " --seed 5 --rounds 6 --k 3");
    REQUIRE(tf.exit_code == 0);
    CHECK(tf.output.find("seed: 5") != std::string::npos);
    CHECK(tf.output.find("accuracy:") != std::string::npos);

    const auto tz = run("train-zone " + common() + "--imu " +
                        ws().p("a.imu.jsonl") + " --beacon " +
                        ws().p("a.beacon.jsonl") + " --out " +
                        ws().p("zone.model") + " --seed 5 --trees 30 --depth 10");
    REQUIRE(tz.exit_code == 0);

    const auto d = run("detect --log " + ws().p("a.log") + " --fall-model " +
                       ws().p("fall.model") + " --zone-model " +
                       ws().p("zone.model") + " --out " + ws().p("events.txt"));
    REQUIRE(d.exit_code == 0);
    const auto events = slurp(ws().dir / "events.txt");
    CHECK(events.find("FALL ") != std::string::npos);
    CHECK(events.find("ZONE ") != std::string::npos);

    const auto ev = run("eval " + common() + "--events " + ws().p("events.txt") +
                        " --truth " + ws().p("a.truth.txt") + " --out " +
                        ws().p("report.txt"));
    REQUIRE(ev.exit_code == 0);
    const auto report = slurp(ws().dir / "report.txt");
    CHECK(report.find("fall_recall=1\n") != std::string::npos);
    CHECK(report.find("fall_precision=1\n") != std::string::npos);
    CHECK(report.find("fall_truth_intervals=6") != std::string::npos);
    CHECK(report.find("zone_accuracy=") != std::string::npos);
}

TEST_CASE("detect without a model is a usage error") {
    CHECK(run("detect --log " + ws().p("a.log") + " --out " +
              ws().p("x.txt")).exit_code == 1);
}

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: cli_tests <aal-binary> [doctest args]\n");
        return 2;
    }
    g_binary = argv[1];
    doctest::Context ctx;
    ctx.applyCommandLine(argc - 1, argv + 1);
    return ctx.run();
}
