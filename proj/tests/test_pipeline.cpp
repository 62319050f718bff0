#include "crush/error.hpp"
#include "crush/pipeline.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace crush;
using namespace crush::pipeline;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path fresh_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("crush_test_" + name);
    fs::remove_all(d);
    return d;
}

int run_quiet(Options o) {
    std::ostringstream log;
    return run(o, log);
}

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("shipped default config reproduces the dataset and cohesive tables") {
    const auto c = parse_config(slurp(resolve_config("default")));
    CHECK(c.dataset.diameters == table::diameters());
    CHECK(c.dataset.shapes == table::shape_texts());
    CHECK(c.dataset.axes.size() == 3);
    CHECK(c.dataset.tests_per_type == 50);
    CHECK(c.czm.K_I == 80);
    CHECK(c.czm.K_II == 120);
    CHECK(c.czm.sigma_I == 9);
    CHECK(c.czm.sigma_II == 11.5);
    CHECK(c.czm.G_I == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(c.czm.G_II == doctest::Approx(1.125).epsilon(1e-15));
    CHECK(c.czm.mu == 0.3);
    CHECK(c.czm.rho == 2650);
    CHECK(c.min_valid == 30);
    CHECK(c.model.batch_size == 128);
    CHECK(c.model.learning_rate == 1e-3);
    CHECK(c.model.hidden == 128);
    CHECK(c.model.n_layers == 2);
    CHECK(c.model.dropout == 0.1);
    CHECK(c.model.eps == 1e-5);

    const auto desk = parse_config(slurp(resolve_config("desk")));
    CHECK(desk.dataset.diameters.size() * desk.dataset.shapes.size() * desk.dataset.axes.size() == 20);
    CHECK(desk.dataset.tests_per_type == 30);
}

TEST_CASE("config errors") {
    const std::string head = "[meta]\nschema = crush.config/1\n";
    CHECK_NOTHROW(parse_config(head));
    auto kind = [](const std::string& text) {
        try {
            parse_config(text);
        } catch (const Error& e) {
            return e.kind();
        }
        return ErrorKind::DegenerateSpec;
    };
    CHECK(kind("[meta]\nschema = crush.config/0\n") == ErrorKind::SchemaMismatch);
    CHECK(kind(head + "[dataset]\ncolour = red\n") == ErrorKind::Config);
    CHECK(kind(head + "[dataset]\ntests_per_type = many\n") == ErrorKind::Config);
    CHECK(kind(head + "[dataset]\nshapes = 1,1\n") == ErrorKind::Config);
    CHECK(kind(head + "[model]\ndropout = 1\n") == ErrorKind::Config);
    CHECK(kind(head + "[model]\nreadout = median\n") == ErrorKind::Config);
    CHECK(kind(head + "[attribution]\ntask = volume\n") == ErrorKind::UnknownTask);
    const auto c = parse_config(head + "[dataset]\nshapes = 1,1,1 | 1.25,1.44/1.25,1\naxes = Z\n");
    CHECK(c.dataset.shapes.size() == 2);
    CHECK(c.dataset.axes == std::vector<Axis>{Axis::Z});
}

TEST_CASE("ablation variants") {
    learn::ModelConfig m;
    CHECK(apply_ablation(m, Ablation::Baseline).use_pmd);
    const auto np = apply_ablation(m, Ablation::NoPmd);
    CHECK_FALSE(np.use_pmd);
    CHECK(np.arch == learn::Arch::Gnn);
    CHECK_FALSE(apply_ablation(m, Ablation::NoNef).use_nef);
    CHECK(parse_ablation("no-nef") == Ablation::NoNef);
    CHECK_THROWS_AS(parse_ablation("none"), Error);
}

TEST_CASE("sha256 of a known message") {
    const auto d = fresh_dir("sha");
    fs::create_directories(d);
    std::ofstream(d / "abc") << "abc";
    CHECK(sha256_file(d / "abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("gen with the default config lists 900 particle types") {
    Options o;
    o.command = "gen";
    o.config = "default";
    o.out = fresh_dir("gen");
    REQUIRE(run_quiet(o) == kOk);
    const auto specs = slurp(o.out / "specs.csv");
    CHECK(count_lines(specs) == 2 + 900);
    CHECK(specs.rfind("#schema=crush.specs/1\n", 0) == 0);

    // byte-identical replay, and the manifest records the output hash
    const auto first = slurp(o.out / "manifest.json");
    REQUIRE(run_quiet(o) == kOk);
    CHECK(slurp(o.out / "manifest.json") == first);
    const auto m = nlohmann::json::parse(first);
    CHECK(m["schema"] == kManifestSchema);
    CHECK(m["entries"]["gen"]["outputs"]["specs.csv"] == sha256_file(o.out / "specs.csv"));
    CHECK(m["entries"]["gen"]["seed"] == 0);

    o.seed = 5;
    REQUIRE(run_quiet(o) == kOk);
    CHECK(slurp(o.out / "specs.csv") != specs);
}

TEST_CASE("simulate --limit 1 then plot writes a parseable load-displacement figure") {
    Options o;
    o.config = "default";
    o.out = fresh_dir("plot");
    o.command = "gen";
    REQUIRE(run_quiet(o) == kOk);
    o.command = "simulate";
    o.limit = 1;
    REQUIRE(run_quiet(o) == kOk);
    CHECK(count_lines(slurp(o.out / "records.jsonl")) == 1);
    o.command = "plot";
    o.limit.reset();
    REQUIRE(run_quiet(o) == kOk);
    REQUIRE(fs::exists(o.out / "curve_0.svg"));
    boost::property_tree::ptree tree;
    std::istringstream in(slurp(o.out / "curve_0.svg"));
    CHECK_NOTHROW(boost::property_tree::read_xml(in, tree));
    CHECK(tree.count("svg") == 1);
    const auto m = nlohmann::json::parse(slurp(o.out / "manifest.json"));
    // stages chain by hash
    CHECK(m["entries"]["simulate"]["inputs"]["specs.csv"] == m["entries"]["gen"]["outputs"]["specs.csv"]);
    CHECK(m["entries"]["plot"]["inputs"]["records.jsonl"] == m["entries"]["simulate"]["outputs"]["records.jsonl"]);
}

TEST_CASE("exit codes") {
    Options o;
    o.config = "default";
    o.out = fresh_dir("codes");
    o.command = "fit-weibull";
    CHECK(run_quiet(o) == kMissingInput);
    o.command = "nonsense";
    CHECK(run_quiet(o) == kUsage);
    o.command = "gen";
    o.config = "no-such-preset";
    CHECK(run_quiet(o) == kUsage);
    o.config = "default";
    REQUIRE(run_quiet(o) == kOk);
    {
        std::ofstream(o.out / "records.jsonl") << "{\"schema\":\"crush.record/0\",\"type_id\":0,\"test_index\":0,"
                                                  "\"particle_seed\":1}\n";
    }
    o.command = "fit-weibull";
    CHECK(run_quiet(o) == kSchema);
    o.command = "split";
    CHECK(run_quiet(o) == kUsage);  // --task missing
}
