#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "conclab/config.hpp"
#include "conclab/experiments.hpp"

using namespace conclab;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
    fs::path p = fs::current_path() / "harness_tmp";
    fs::create_directories(p);
    return p;
}

std::string write_file(const std::string& name, const std::string& text) {
    fs::path p = scratch() / name;
    std::ofstream out(p);
    out << text;
    return p.string();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    std::string cmd = "./conclab " + args + " > /dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return status < 0 ? status : (status >> 8) & 0xff;
}

} // namespace

TEST_CASE("raw config parsing") {
    std::istringstream in("# top comment\n[experiment]\nkind = verify  # trailing comment\n\n[model]\nn = 4\n");
    RawConfig raw = parse_raw_config(in, "mem");
    CHECK(raw.get("experiment.kind") == "verify");
    CHECK(raw.get("model.n") == "4");
    CHECK(raw.values.at("model.n").line == 6);
    CHECK_FALSE(raw.has("model.beta0"));
    CHECK(raw.get_or("model.beta0", "0.5") == "0.5");

    std::istringstream dup("[a]\nx = 1\nx = 2\n");
    CHECK_THROWS_WITH_AS(parse_raw_config(dup, "mem"), doctest::Contains("mem:3"), config_error);
    std::istringstream noeq("[a]\njust words\n");
    CHECK_THROWS_WITH_AS(parse_raw_config(noeq, "mem"), doctest::Contains("mem:2"), config_error);
    std::istringstream badsec("[a\nx = 1\n");
    CHECK_THROWS_AS(parse_raw_config(badsec, "mem"), config_error);
}

TEST_CASE("schema validation rejects unknown keys with their location") {
    std::istringstream in("[experiment]\nkind = verify\n[modle]\nn = 4\n");
    RawConfig raw = parse_raw_config(in, "mem");
    CHECK_THROWS_WITH_AS(validate_config(raw), doctest::Contains("modle.n"), config_error);

    std::istringstream nokind("[model]\nn = 4\n");
    CHECK_THROWS_AS(validate_config(parse_raw_config(nokind, "mem")), config_error);

    std::istringstream badkind("[experiment]\nkind = validate\n");
    CHECK_THROWS_AS(validate_config(parse_raw_config(badkind, "mem")), config_error);

    std::istringstream badnum("[experiment]\nkind = verify\n[model]\nn = four\n");
    CHECK_THROWS_WITH_AS(validate_config(parse_raw_config(badnum, "mem")), doctest::Contains("model.n"),
                         config_error);
}

TEST_CASE("tail runs demand a master seed") {
    std::istringstream ok("[experiment]\nkind = tails\nseed = 7\n[model]\nn = 4\n");
    ExperimentConfig cfg = validate_config(parse_raw_config(ok, "mem"));
    CHECK(cfg.seed.has_value());
    CHECK(*cfg.seed == 7);
    cfg.seed.reset();
    std::ostringstream log;
    CHECK_THROWS_WITH_AS(run_experiment(cfg, log), doctest::Contains("seed"), config_error);
}

TEST_CASE("defaults and typed accessors") {
    std::istringstream in("[experiment]\nkind = verify\nseed = 11\ninstances = 3\n[model]\ntype = curie_weiss\n"
                          "n = 5\nbeta0 = 0.25\n");
    ExperimentConfig cfg = validate_config(parse_raw_config(in, "mem"));
    CHECK(cfg.kind == ExperimentKind::verify);
    CHECK(cfg.n == 5);
    CHECK(cfg.beta0 == 0.25);
    CHECK(cfg.instances == 3);
    CHECK(cfg.tolerance == 1e-9);
    CHECK(cfg.out_dir == ".");
    CHECK(kind_name(cfg.kind) == std::string("verify"));
}

TEST_CASE("certificate run writes the expected free-model constants") {
    fs::path out = scratch() / "cert_free";
    ExperimentConfig cfg;
    cfg.kind = ExperimentKind::certify;
    cfg.model_type = "zero";
    cfg.n = 4;
    cfg.out_dir = out.string();
    std::ostringstream log;
    CHECK(run_experiment(cfg, log) == 0);
    std::string csv = slurp(out / "certificate.csv");
    CHECK(csv.find("field,value") != std::string::npos);
    CHECK(csv.find("beta_min,0.5") != std::string::npos);
    CHECK(csv.find("a_norm,0\n") != std::string::npos);
    CHECK(csv.find("c_at,4\n") != std::string::npos);
}

TEST_CASE("verification run passes on a small weakly dependent model") {
    fs::path out = scratch() / "verify_small";
    ExperimentConfig cfg;
    cfg.kind = ExperimentKind::verify;
    cfg.model_type = "curie_weiss";
    cfg.n = 4;
    cfg.beta0 = 0.4;
    cfg.instances = 3;
    cfg.seed = 99;
    cfg.out_dir = out.string();
    std::ostringstream log;
    CHECK(run_experiment(cfg, log) == 0);
    std::string csv = slurp(out / "report.csv");
    CHECK(csv.rfind("check,instance,p_or_d,lhs,rhs,slack,pass", 0) == 0);
    CHECK(csv.find(",0\n") == std::string::npos); // no failing rows
    CHECK(csv.find("moment_lower") != std::string::npos);
    CHECK(csv.find("sandwich") != std::string::npos);
}

TEST_CASE("tail runs are byte-for-byte reproducible under one seed") {
    ExperimentConfig cfg;
    cfg.kind = ExperimentKind::tails;
    cfg.model_type = "curie_weiss";
    cfg.n = 5;
    cfg.beta0 = 0.4;
    cfg.degree = 2;
    cfg.steps = 3000;
    cfg.seed = 4242;
    fs::path out1 = scratch() / "tails_a", out2 = scratch() / "tails_b";
    std::ostringstream log;
    cfg.out_dir = out1.string();
    int rc1 = run_experiment(cfg, log);
    cfg.out_dir = out2.string();
    int rc2 = run_experiment(cfg, log);
    CHECK(rc1 == 0);
    CHECK(rc2 == 0);
    CHECK(slurp(out1 / "samples.csv") == slurp(out2 / "samples.csv"));
    CHECK(slurp(out1 / "tails.csv") == slurp(out2 / "tails.csv"));
    std::string tails = slurp(out1 / "tails.csv");
    CHECK(tails.rfind("t,empirical,bound,stderr", 0) == 0);
    std::string samples = slurp(out1 / "samples.csv");
    CHECK(samples.rfind("step,value", 0) == 0);

    cfg.seed = 4243;
    fs::path out3 = scratch() / "tails_c";
    cfg.out_dir = out3.string();
    CHECK(run_experiment(cfg, log) == 0);
    CHECK(slurp(out1 / "samples.csv") != slurp(out3 / "samples.csv"));
}

TEST_CASE("scan marks the contraction boundary") {
    ExperimentConfig cfg;
    cfg.kind = ExperimentKind::scan;
    cfg.model_type = "curie_weiss";
    cfg.n = 5;
    cfg.seed = 1;
    cfg.scan_parameter = "beta0";
    cfg.scan_from = 0.0;
    cfg.scan_to = 1.5;
    cfg.scan_points = 4; // 0, 0.5, 1.0, 1.5
    fs::path out = scratch() / "scan";
    cfg.out_dir = out.string();
    std::ostringstream log;
    CHECK(run_experiment(cfg, log) == 0);
    std::string csv = slurp(out / "scan.csv");
    CHECK(csv.find(",1\n") != std::string::npos); // contracting rows
    CHECK(csv.find(",0\n") != std::string::npos); // rows beyond the threshold
    CHECK(csv.find("nan") != std::string::npos);
}

TEST_CASE("named scaling table") {
    ExperimentConfig cfg;
    cfg.kind = ExperimentKind::constants;
    cfg.n = 6;
    fs::path out = scratch() / "constants";
    cfg.out_dir = out.string();
    std::ostringstream log;
    CHECK(run_experiment(cfg, log) == 0);
    std::string csv = slurp(out / "constants.csv");
    CHECK(csv.rfind("chain,n,r,scaling,c_known", 0) == 0);
    CHECK(csv.find("transposition,6,") != std::string::npos);
    CHECK(csv.find("bernoulli_laplace,6,3,") != std::string::npos);
    CHECK(csv.find("ssep,6,3,36,") != std::string::npos);
}

TEST_CASE("command line interface exit codes") {
    if (!fs::exists("./conclab")) return; // only meaningful next to the built binary

    std::string good = write_file("cli_certify.conf",
                                  "[experiment]\nkind = certify\nout = harness_tmp/cli_out\n[model]\n"
                                  "type = curie_weiss\nn = 4\nbeta0 = 0.3\n");
    CHECK(run_cli("certify --config " + good) == 0);
    CHECK(run_cli("verify --config " + good) == 2);           // kind mismatch
    CHECK(run_cli("certify --config harness_tmp/absent.conf") == 2);
    CHECK(run_cli("certify") == 2);                           // missing required option
    CHECK(run_cli("--help") == 0);

    std::string bad_key = write_file("cli_bad.conf",
                                     "[experiment]\nkind = certify\n[modle]\nn = 4\n");
    CHECK(run_cli("certify --config " + bad_key) == 2);

    std::string hot = write_file("cli_hot.conf",
                                 "[experiment]\nkind = certify\nout = harness_tmp/cli_out\n[model]\n"
                                 "type = curie_weiss\nn = 4\nbeta0 = 1.5\n");
    CHECK(run_cli("certify --config " + hot) == 1); // runs, but outside the contraction regime

    std::string tails = write_file("cli_tails.conf",
                                   "[experiment]\nkind = tails\nout = harness_tmp/cli_tails\n[model]\n"
                                   "type = curie_weiss\nn = 4\nbeta0 = 0.3\n[chain]\nsteps = 500\n");
    CHECK(run_cli("tails --config " + tails) == 2);            // no seed anywhere
    CHECK(run_cli("tails --seed 5 --config " + tails) == 0);   // seed supplied on the command line
}
