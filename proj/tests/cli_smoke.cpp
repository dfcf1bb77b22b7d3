// End-to-end checks of the command line surface: exit codes, artifact
// layout, output formats, and idempotent re-rendering. argv[1] is the
// aggronet binary.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

namespace fs = std::filesystem;

namespace {

std::string g_cli;
fs::path g_work;
int g_failures = 0;

void require(bool ok, const std::string& msg) {
    if (ok) return;
    ++g_failures;
    std::printf("FAIL %s\n", msg.c_str());
}

struct RunResult {
    int exit_code = -1;
    std::string output;
};

RunResult run_cmd(const std::string& args) {
    RunResult r;
    std::string full = "'" + g_cli + "' " + args + " 2>&1";
    FILE* p = popen(full.c_str(), "r");
    if (!p) return r;
    char buf[4096];
    size_t n;
    while ((n = fread(buf, 1, sizeof(buf), p)) > 0) r.output.append(buf, n);
    int st = pclose(p);
    if (WIFEXITED(st)) r.exit_code = WEXITSTATUS(st);
    return r;
}

std::string slurp(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) return "<unreadable:" + path.string() + ">";
    std::ostringstream body;
    body << f.rdbuf();
    return body.str();
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
}

int count_ppm(const fs::path& root) {
    int n = 0;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file() && e.path().extension() == ".ppm") ++n;
    return n;
}

fs::path small_config() {
    fs::path cfg = g_work / "small.toml";
    write_file(cfg,
               "seed = 11\nout = \"" + (g_work / "run").string() +
                   "\"\n\n[data.synth]\nper_class = 40\n\n[data.split]\ntrain_frac = 0.7\n"
                   "val_frac = 0.15\ntest_frac = 0.15\n\n[model]\nimage_size = 16\nclasses = 3\n"
                   "vgg_blocks = [[1, 8], [1, 16]]\nstem_channels = 8\n"
                   "inception_blocks = [[8, 8, 16, 4, 8, 8]]\nhead = [32]\ndropout = 0.3\n\n"
                   "[train]\nepochs = 2\nbatch_size = 16\n");
    return cfg;
}

void check_exit_codes() {
    require(run_cmd("--help").exit_code == 0, "--help should exit 0");
    require(run_cmd("definitely-not-a-command").exit_code == 2, "unknown subcommand should exit 2");
    require(run_cmd("train").exit_code == 2, "train with no data source should exit 2");
    require(run_cmd("train --config " + (g_work / "missing.toml").string()).exit_code == 2,
            "unreadable config should exit 2");

    write_file(g_work / "bad_type.toml", "[train]\nepochs = \"ten\"\n");
    RunResult r = run_cmd("train --config " + (g_work / "bad_type.toml").string());
    require(r.exit_code == 2, "type error in config should exit 2");
    require(r.output.find("train.epochs") != std::string::npos,
            "type error should name the offending key, got: " + r.output.substr(0, 120));

    write_file(g_work / "bad_key.toml", "[train]\nepoch = 3\n");
    require(run_cmd("train --config " + (g_work / "bad_key.toml").string()).exit_code == 2,
            "unknown config key should exit 2");
}

void check_synth_tree() {
    write_file(g_work / "synth.toml", "seed = 7\n\n[data.synth]\nper_class = 565\n");
    fs::path tree = g_work / "tree";
    RunResult r = run_cmd("synth --config " + (g_work / "synth.toml").string() + " --out " +
                          tree.string());
    require(r.exit_code == 0, "synth should exit 0, output: " + r.output.substr(0, 200));
    require(count_ppm(tree) == 4520, "8 classes x 565 images should write 4520 ppm files");
    int dirs = 0;
    for (const auto& e : fs::directory_iterator(tree)) dirs += e.is_directory();
    require(dirs == 8, "synth tree should hold 8 class directories");
    require(r.output.find("class_0 565") != std::string::npos,
            "synth should print per-class counts, got: " + r.output.substr(0, 200));
}

void check_train_eval_cycle() {
    fs::path cfg = small_config();
    RunResult tr = run_cmd("train --config " + cfg.string());
    require(tr.exit_code == 0, "train should exit 0, output: " + tr.output.substr(0, 300));
    for (const char* f : {"checkpoint/weights.bin", "checkpoint/manifest.json", "history.csv",
                          "history.json", "manifest.json"})
        require(fs::exists(g_work / "run" / f), std::string("train should write ") + f);
    require(slurp(g_work / "run" / "manifest.json").find("timestamp") == std::string::npos,
            "manifest must not carry timestamps");

    RunResult ev = run_cmd("eval --config " + cfg.string() + " --partition test");
    require(ev.exit_code == 0, "eval should exit 0, output: " + ev.output.substr(0, 300));
    require(ev.output.find("precision") != std::string::npos &&
                ev.output.find("weighted avg") != std::string::npos,
            "eval should print the per-class table");
    for (const char* f : {"report.json", "report.txt", "confusion.csv", "history.csv",
                          "roc_class_0.csv", "roc_class_1.csv", "roc_class_2.csv"})
        require(fs::exists(g_work / "run" / "eval_test" / f),
                std::string("eval should write eval_test/") + f);
    require(fs::exists(g_work / "run" / "history.csv") &&
                slurp(g_work / "run" / "history.csv") !=
                    slurp(g_work / "run" / "eval_test" / "history.csv"),
            "eval must not clobber the training history");
}

void check_zero_epochs() {
    fs::path cfg = small_config();
    RunResult r = run_cmd("train --config " + cfg.string() + " --epochs 0 --out " +
                          (g_work / "run0").string());
    require(r.exit_code == 0, "zero-epoch train should exit 0");
    require(fs::exists(g_work / "run0" / "checkpoint" / "weights.bin"),
            "zero-epoch train should still write an initial checkpoint");
    require(slurp(g_work / "run0" / "history.csv") ==
                "epoch,train_loss,train_acc,val_loss,val_acc,lr\n",
            "zero-epoch history should be the bare header");
}

void check_predict() {
    fs::path img;
    for (const auto& e : fs::recursive_directory_iterator(g_work / "tree" / "class_0"))
        if (e.is_regular_file()) {
            img = e.path();
            break;
        }
    RunResult r = run_cmd("predict " + img.string() + " --checkpoint " +
                          (g_work / "run" / "checkpoint").string());
    require(r.exit_code == 0, "predict should exit 0, output: " + r.output.substr(0, 300));
    require(r.output.rfind("prediction: ", 0) == 0, "predict should lead with the top class");

    // One probability line per class, four decimals, summing to 1.
    std::istringstream lines(r.output);
    std::string line;
    std::getline(lines, line);
    double sum = 0.0;
    int rows = 0;
    while (std::getline(lines, line)) {
        const size_t sp = line.rfind(' ');
        if (sp == std::string::npos) continue;
        sum += std::stod(line.substr(sp + 1));
        ++rows;
    }
    require(rows == 3, "predict should print one probability per class");
    require(std::fabs(sum - 1.0) <= 1e-4 + 1e-12, "probabilities should sum to 1.0000");

    write_file(g_work / "corrupt.ppm", "P6\n4 4\n255\nshort");
    RunResult bad = run_cmd("predict " + (g_work / "corrupt.ppm").string() + " --checkpoint " +
                            (g_work / "run" / "checkpoint").string());
    require(bad.exit_code == 1, "corrupt ppm should exit 1, got " + std::to_string(bad.exit_code));
    require(bad.output.find("error:") != std::string::npos, "corrupt ppm should explain itself");
}

void check_report_rerender() {
    fs::path eval_dir = g_work / "run" / "eval_test";
    std::vector<std::pair<fs::path, std::string>> before;
    for (const auto& e : fs::directory_iterator(eval_dir))
        before.emplace_back(e.path(), slurp(e.path()));

    RunResult r = run_cmd("report --from " + eval_dir.string());
    require(r.exit_code == 0, "report should exit 0, output: " + r.output.substr(0, 300));
    require(r.output.find("weighted avg") != std::string::npos, "report should print the table");
    for (const auto& [path, text] : before)
        require(slurp(path) == text, "report re-render changed " + path.filename().string());

    RunResult svg = run_cmd("report --from " + eval_dir.string() + " --svg");
    require(svg.exit_code == 0, "report --svg should exit 0");
    require(fs::exists(eval_dir / "curves.svg") && fs::exists(eval_dir / "confusion.svg"),
            "report --svg should render the figures");

    require(run_cmd("report --from " + (g_work / "nowhere").string()).exit_code == 1,
            "report on a missing directory should exit 1");
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: cli_smoke <path-to-aggronet-binary>\n");
        return 2;
    }
    g_cli = argv[1];
    g_work = fs::temp_directory_path() / "aggronet_cli_smoke";
    std::error_code ec;
    fs::remove_all(g_work, ec);
    fs::create_directories(g_work);

    check_exit_codes();
    check_synth_tree();
    check_train_eval_cycle();
    check_zero_epochs();
    check_predict();
    check_report_rerender();

    if (g_failures == 0) {
        std::printf("cli_smoke: all checks passed\n");
        fs::remove_all(g_work, ec);
        return 0;
    }
    std::printf("cli_smoke: %d failures\n", g_failures);
    return 1;
}
