#include "crush/pipeline.hpp"

#include "crush/attribution.hpp"
#include "crush/error.hpp"
#include "crush/features.hpp"
#include "crush/graphset.hpp"
#include "crush/tessellation.hpp"
#include "crush/weibull.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#ifndef CRUSH_CONFIG_DIR
#define CRUSH_CONFIG_DIR "config"
#endif

namespace crush::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;
using graphset::FragmentGraph;

namespace {

constexpr const char* kSpecsSchema = "crush.specs/1";
constexpr const char* kWeibullSchema = "crush.weibull/1";
constexpr const char* kStrengthsSchema = "crush.strengths/1";
constexpr const char* kFeaturesSchema = "crush.features/1";
constexpr const char* kHistorySchema = "crush.history/1";
constexpr const char* kEvalSchema = "crush.eval/1";
constexpr const char* kPredictionsSchema = "crush.predictions/1";
constexpr const char* kAblationSchema = "crush.ablation/1";
constexpr const char* kAttributionSchema = "crush.attribution/1";
constexpr const char* kSummarySchema = "crush.summary/1";
constexpr const char* kCurveSchema = "crush.curve/1";

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto p = s.find(sep, start);
        out.push_back(trim(s.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start)));
        if (p == std::string_view::npos) break;
        start = p + 1;
    }
    return out;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string short_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

double to_double(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (v.empty() || *end != '\0' || !std::isfinite(x)) throw Error(ErrorKind::Config, key + ": not a number: " + v);
    return x;
}

long long to_int(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const long long x = std::strtoll(v.c_str(), &end, 10);
    if (v.empty() || *end != '\0') throw Error(ErrorKind::Config, key + ": not an integer: " + v);
    return x;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
    if (v.empty() || v[0] == '-' || *end != '\0') throw Error(ErrorKind::Config, key + ": not a seed: " + v);
    return x;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw Error(ErrorKind::Config, key + ": not a boolean: " + v);
}

// ---------------------------------------------------------------- files

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorKind::MissingInput, p.filename().string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

/// Inputs and outputs of one command, by file name.
struct Io {
    fs::path dir;
    json inputs = json::object();
    json outputs = json::object();

    fs::path input(const std::string& name) {
        const auto p = dir / name;
        if (!fs::exists(p)) throw Error(ErrorKind::MissingInput, name + " (run the producing stage first)");
        inputs[name] = sha256_file(p);
        return p;
    }
    std::string read(const std::string& name) { return read_text(input(name)); }

    void write(const std::string& name, const std::string& content) {
        const auto p = dir / name;
        const auto tmp = dir / (name + ".tmp");
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw Error(ErrorKind::MissingInput, "cannot write " + name);
            out << content;
        }
        fs::rename(tmp, p);
        outputs[name] = sha256_file(p);
    }
};

std::string with_schema(const char* schema, const std::string& body) {
    return std::string("#schema=") + schema + "\n" + body;
}

/// Body of a CSV file after its schema line.
std::string csv_body(const std::string& text, const char* schema, const std::string& name) {
    const auto nl = text.find('\n');
    const std::string first = text.substr(0, nl);
    if (first != std::string("#schema=") + schema)
        throw Error(ErrorKind::SchemaMismatch, name + ": expected " + schema);
    return nl == std::string::npos ? std::string() : text.substr(nl + 1);
}

/// Data rows (header checked, then dropped).
std::vector<std::vector<std::string>> csv_rows(const std::string& text, const char* schema, const std::string& name,
                                               const std::string& header) {
    std::istringstream in(csv_body(text, schema, name));
    std::string line;
    if (!std::getline(in, line) || line != header) throw Error(ErrorKind::SchemaMismatch, name + ": unexpected header");
    const auto width = split(header, ',').size();
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto r = split(line, ',');
        if (r.size() != width) throw Error(ErrorKind::ShapeMismatch, name + ": row width");
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<json> read_jsonl(const std::string& text) {
    std::vector<json> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) out.push_back(json::parse(line));
    return out;
}

// ---------------------------------------------------------------- workers

template <class F>
void parallel_for(std::size_t n, int workers, F&& fn) {
    std::size_t w = workers > 0 ? static_cast<std::size_t>(workers) : std::max(1u, std::thread::hardware_concurrency());
    w = std::min(w, n);
    if (w <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < w; ++t)
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next++;
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------- stage data

struct SpecRow {
    int type_id = 0;
    TypeKey key;
    int tests = 0;
    std::uint64_t type_seed = 0;
};

const std::string kSpecsHeader = "type_id,diameter,sx,sy,sz,axis,tests,type_seed";

std::vector<SpecRow> read_specs(Io& io) {
    std::vector<SpecRow> specs;
    for (const auto& r : csv_rows(io.read("specs.csv"), kSpecsSchema, "specs.csv", kSpecsHeader)) {
        SpecRow s;
        s.type_id = static_cast<int>(to_int("type_id", r[0]));
        s.key.diameter = to_double("diameter", r[1]);
        s.key.shape = {to_double("sx", r[2]), to_double("sy", r[3]), to_double("sz", r[4])};
        s.key.axis = parse_axis(r[5]);
        s.tests = static_cast<int>(to_int("tests", r[6]));
        s.type_seed = to_u64("type_seed", r[7]);
        specs.push_back(s);
    }
    return specs;
}

struct RecordRow {
    int type_id = 0;
    int test_index = 0;
    std::uint64_t particle_seed = 0;
    simulator::CrushRecord record;
};

std::vector<RecordRow> read_records(Io& io) {
    std::vector<RecordRow> out;
    for (const auto& j : read_jsonl(io.read("records.jsonl"))) {
        RecordRow r;
        r.type_id = j.at("type_id").get<int>();
        r.test_index = j.at("test_index").get<int>();
        r.particle_seed = j.at("particle_seed").get<std::uint64_t>();
        r.record = simulator::record_from_json(j);
        out.push_back(std::move(r));
    }
    return out;
}

const std::string kWeibullHeader = "type_id,diameter,sx,sy,sz,axis,n_tests,n_valid,m,sigma0,r2,status";

struct FitRow {
    SpecRow spec;
    weibull::WeibullFit fit;
    std::string status;
};

std::vector<FitRow> read_fits(Io& io) {
    std::vector<FitRow> out;
    for (const auto& r : csv_rows(io.read("weibull.csv"), kWeibullSchema, "weibull.csv", kWeibullHeader)) {
        FitRow f;
        f.spec.type_id = static_cast<int>(to_int("type_id", r[0]));
        f.spec.key.diameter = to_double("diameter", r[1]);
        f.spec.key.shape = {to_double("sx", r[2]), to_double("sy", r[3]), to_double("sz", r[4])};
        f.spec.key.axis = parse_axis(r[5]);
        f.spec.tests = static_cast<int>(to_int("n_tests", r[6]));
        f.fit.n_valid = static_cast<int>(to_int("n_valid", r[7]));
        f.fit.m = to_double("m", r[8]);
        f.fit.sigma0 = to_double("sigma0", r[9]);
        f.fit.r2 = to_double("r2", r[10]);
        f.status = r[11];
        out.push_back(f);
    }
    return out;
}

std::vector<FragmentGraph> parse_graphs(const std::string& text) {
    std::istringstream in(text);
    return graphset::read_jsonl(in);
}

std::string graphs_text(const std::vector<FragmentGraph>& gs) {
    std::ostringstream out;
    graphset::write_jsonl(out, gs);
    return out.str();
}

// ---------------------------------------------------------------- svg

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Series {
    std::vector<std::pair<double, double>> points;
    bool line = true;
    std::string colour = "#1f77b4";
    std::string name;
};

/// One x-y panel at (ox, oy) of size w x h.
void panel(std::ostringstream& s, double ox, double oy, double w, double h, const std::string& title,
           const std::string& xlabel, const std::string& ylabel, const std::vector<Series>& series) {
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& se : series)
        for (const auto& [x, y] : se.points) {
            x0 = std::min(x0, x), x1 = std::max(x1, x);
            y0 = std::min(y0, y), y1 = std::max(y1, y);
        }
    if (!(x0 <= x1)) x0 = 0, x1 = 1;
    if (!(y0 <= y1)) y0 = 0, y1 = 1;
    if (x1 - x0 <= 0) x0 -= 0.5, x1 += 0.5;
    if (y1 - y0 <= 0) y0 -= 0.5, y1 += 0.5;
    const double l = ox + 60, r = ox + w - 15, t = oy + 30, b = oy + h - 45;
    auto px = [&](double x) { return l + (x - x0) / (x1 - x0) * (r - l); };
    auto py = [&](double y) { return b - (y - y0) / (y1 - y0) * (b - t); };
    s << "<g class=\"panel\">\n";
    s << "<text x=\"" << (l + r) / 2 << "\" y=\"" << oy + 18 << "\" text-anchor=\"middle\" font-size=\"13\">"
      << escape(title) << "</text>\n";
    s << "<rect x=\"" << l << "\" y=\"" << t << "\" width=\"" << r - l << "\" height=\"" << b - t
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = x0 + (x1 - x0) * k / 4, yv = y0 + (y1 - y0) * k / 4;
        s << "<text x=\"" << px(xv) << "\" y=\"" << b + 14 << "\" text-anchor=\"middle\" font-size=\"10\">"
          << short_num(xv) << "</text>\n";
        s << "<text x=\"" << l - 4 << "\" y=\"" << py(yv) + 3 << "\" text-anchor=\"end\" font-size=\"10\">"
          << short_num(yv) << "</text>\n";
    }
    s << "<text x=\"" << (l + r) / 2 << "\" y=\"" << b + 32 << "\" text-anchor=\"middle\" font-size=\"11\">"
      << escape(xlabel) << "</text>\n";
    s << "<text transform=\"translate(" << ox + 14 << "," << (t + b) / 2
      << ") rotate(-90)\" text-anchor=\"middle\" font-size=\"11\">" << escape(ylabel) << "</text>\n";
    for (const auto& se : series) {
        if (se.line && se.points.size() > 1) {
            s << "<polyline class=\"series\" data-name=\"" << escape(se.name) << "\" fill=\"none\" stroke=\""
              << se.colour << "\" points=\"";
            for (const auto& [x, y] : se.points) s << short_num(px(x)) << ',' << short_num(py(y)) << ' ';
            s << "\"/>\n";
        } else {
            for (const auto& [x, y] : se.points)
                s << "<circle cx=\"" << short_num(px(x)) << "\" cy=\"" << short_num(py(y)) << "\" r=\"2.5\" fill=\""
                  << se.colour << "\"/>\n";
        }
    }
    s << "</g>\n";
}

std::string svg_document(double w, double h, const std::string& body) {
    std::ostringstream s;
    s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
      << ' ' << h << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << body << "</svg>\n";
    return s.str();
}

std::vector<std::pair<double, double>> histogram_outline(const std::vector<double>& v, int bins) {
    std::vector<std::pair<double, double>> out;
    if (v.empty()) return out;
    const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
    double lo = *lo_it, hi = *hi_it;
    if (hi - lo <= 0) lo -= 0.5, hi += 0.5;
    std::vector<int> count(bins, 0);
    for (double x : v) ++count[std::min(bins - 1, static_cast<int>((x - lo) / (hi - lo) * bins))];
    out.push_back({lo, 0});
    for (int k = 0; k < bins; ++k) {
        const double a = lo + (hi - lo) * k / bins, b = lo + (hi - lo) * (k + 1) / bins;
        out.push_back({a, count[k]});
        out.push_back({b, count[k]});
    }
    out.push_back({hi, 0});
    return out;
}

// ---------------------------------------------------------------- config

using Setter = std::function<void(PipelineConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> s = [] {
        std::map<std::string, Setter> m;
        m["meta.schema"] = [](PipelineConfig&, const std::string& k, const std::string& v) {
            if (v != kConfigSchema) throw Error(ErrorKind::SchemaMismatch, k + ": expected " + kConfigSchema);
        };
        m["dataset.diameters"] = [](PipelineConfig& c, const std::string& k, const std::string& v) {
            c.dataset.diameters.clear();
            for (const auto& t : split(v, ',')) c.dataset.diameters.push_back(to_double(k, t));
        };
        m["dataset.shapes"] = [](PipelineConfig& c, const std::string&, const std::string& v) {
            c.dataset.shapes = split(v, '|');
        };
        m["dataset.axes"] = [](PipelineConfig& c, const std::string&, const std::string& v) {
            c.dataset.axes.clear();
            for (const auto& t : split(v, ',')) c.dataset.axes.push_back(parse_axis(t));
        };
        m["dataset.tests_per_type"] = [](PipelineConfig& c, const std::string& k, const std::string& v) {
            c.dataset.tests_per_type = static_cast<int>(to_int(k, v));
        };
        m["dataset.seed"] = [](PipelineConfig& c, const std::string& k, const std::string& v) {
            c.dataset.seed = to_u64(k, v);
        };
        m["dataset.facet_count"] = [](PipelineConfig& c, const std::string& k, const std::string& v) {
            c.dataset.facet_count = static_cast<int>(to_int(k, v));
        };
        auto czm = [&m](const std::string& key, double simulator::CzmParams::*field, double scale) {
            m["czm." + key] = [field, scale](PipelineConfig& c, const std::string& k, const std::string& v) {
                c.czm.*field = to_double(k, v) * scale;
            };
        };
        czm("K_I", &simulator::CzmParams::K_I, 1.0);
        czm("K_II", &simulator::CzmParams::K_II, 1.0);
        czm("sigma_I", &simulator::CzmParams::sigma_I, 1.0);
        czm("sigma_II", &simulator::CzmParams::sigma_II, 1.0);
        // table values are J/m^2; the solver works in N/mm
        czm("G_I", &simulator::CzmParams::G_I, 1e-3);
        czm("G_II", &simulator::CzmParams::G_II, 1e-3);
        czm("mu", &simulator::CzmParams::mu, 1.0);
        czm("rho", &simulator::CzmParams::rho, 1.0);
        m["simulator.step_fraction"] = [](PipelineConfig& c, const std::string& k, const std::string& v) {
            c.load.step_fraction = to_double(k, v);
        };
        m["simulator.max_steps"] = [](PipelineConfig& c, const std::string& k, const std::string& v) {
            c.load.max_steps = static_cast<int>(to_int(k, v));
        };
        m["simulator.drop_fraction"] = [](PipelineConfig& c, const std::string& k, const std::string& v) {
            c.load.drop_fraction = to_double(k, v);
        };
        m["simulator.platen_stiffness_scale"] = [](PipelineConfig& c, const std::string& k, const std::string& v) {
            c.load.platen_stiffness_scale = to_double(k, v);
        };
        m["weibull.min_valid"] = [](PipelineConfig& c, const std::string& k, const std::string& v) {
            c.min_valid = static_cast<int>(to_int(k, v));
        };
        m["split.val_fraction"] = [](PipelineConfig& c, const std::string& k, const std::string& v) {
            c.val_fraction = to_double(k, v);
        };
        m["split.seed"] = [](PipelineConfig& c, const std::string& k, const std::string& v) {
            c.split_seed = to_u64(k, v);
        };
        m["model.arch"] = [](PipelineConfig& c, const std::string&, const std::string& v) {
            c.model.arch = learn::parse_arch(v);
        };
        m["model.readout"] = [](PipelineConfig& c, const std::string&, const std::string& v) {
            c.model.readout = learn::parse_readout(v);
        };
        m["model.activation"] = [](PipelineConfig& c, const std::string&, const std::string& v) {
            c.model.activation = learn::parse_activation(v);
        };
        auto model_int = [&m](const std::string& key, int learn::ModelConfig::*field) {
            m["model." + key] = [field](PipelineConfig& c, const std::string& k, const std::string& v) {
                c.model.*field = static_cast<int>(to_int(k, v));
            };
        };
        model_int("hidden", &learn::ModelConfig::hidden);
        model_int("n_layers", &learn::ModelConfig::n_layers);
        model_int("batch_size", &learn::ModelConfig::batch_size);
        model_int("max_epochs", &learn::ModelConfig::max_epochs);
        model_int("patience", &learn::ModelConfig::patience);
        auto model_real = [&m](const std::string& key, double learn::ModelConfig::*field) {
            m["model." + key] = [field](PipelineConfig& c, const std::string& k, const std::string& v) {
                c.model.*field = to_double(k, v);
            };
        };
        model_real("dropout", &learn::ModelConfig::dropout);
        model_real("eps", &learn::ModelConfig::eps);
        model_real("learning_rate", &learn::ModelConfig::learning_rate);
        model_real("weight_decay", &learn::ModelConfig::weight_decay);
        m["model.seed"] = [](PipelineConfig& c, const std::string& k, const std::string& v) {
            c.model.seed = to_u64(k, v);
        };
        m["attribution.task"] = [](PipelineConfig& c, const std::string&, const std::string& v) {
            c.attribution.task = std::string(graphset::to_string(graphset::parse_task(v)));
        };
        m["attribution.exclude_last_pmd"] = [](PipelineConfig& c, const std::string& k, const std::string& v) {
            c.attribution.exclude_last_pmd = to_bool(k, v);
        };
        return m;
    }();
    return s;
}

void validate(const PipelineConfig& c) {
    if (c.dataset.diameters.empty() || c.dataset.shapes.empty() || c.dataset.axes.empty())
        throw Error(ErrorKind::Config, "dataset needs diameters, shapes and axes");
    for (double d : c.dataset.diameters)
        if (!(d > 0)) throw Error(ErrorKind::Config, "diameters must be positive");
    for (const auto& s : c.dataset.shapes) table::parse_shape(s);
    if (c.dataset.tests_per_type < 1) throw Error(ErrorKind::Config, "tests_per_type must be >= 1");
    if (c.dataset.facet_count < 20) throw Error(ErrorKind::Config, "facet_count must be >= 20");
    c.czm.validate();
    if (!(c.load.step_fraction > 0) || c.load.max_steps < 1 || !(c.load.drop_fraction > 0 && c.load.drop_fraction < 1))
        throw Error(ErrorKind::Config, "simulator controls out of range");
    if (c.min_valid < 3) throw Error(ErrorKind::Config, "weibull.min_valid must be >= 3");
    if (!(c.val_fraction > 0 && c.val_fraction < 1)) throw Error(ErrorKind::Config, "split.val_fraction in (0,1)");
    c.model.validate();
}

// ---------------------------------------------------------------- manifest

void record_manifest(const fs::path& dir, const std::string& key, json entry) {
    const auto path = dir / "manifest.json";
    json m;
    if (fs::exists(path)) {
        m = json::parse(read_text(path));
        if (m.value("schema", "") != kManifestSchema)
            throw Error(ErrorKind::SchemaMismatch, std::string("manifest.json: expected ") + kManifestSchema);
    } else {
        m = {{"schema", kManifestSchema}, {"entries", json::object()}};
    }
    entry["tool_version"] = kToolVersion;
    m["entries"][key] = std::move(entry);
    std::ofstream out(dir / "manifest.json.tmp", std::ios::binary | std::ios::trunc);
    out << m.dump(2) << '\n';
    out.close();
    fs::rename(dir / "manifest.json.tmp", path);
}

// ---------------------------------------------------------------- stages

struct Context {
    Options opt;
    PipelineConfig config;
    std::string config_hash;
    std::ostream& log;
    Io io;
    json extra = json::object();
    std::optional<std::uint64_t> seed_used;

    graphset::Task task() const {
        if (!opt.task) throw Error(ErrorKind::Config, opt.command + " needs --task");
        return graphset::parse_task(*opt.task);
    }
    std::string task_name() const { return std::string(graphset::to_string(task())); }
};

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

void cmd_gen(Context& c) {
    const auto& ds = c.config.dataset;
    const std::uint64_t seed = c.opt.seed.value_or(ds.seed);
    c.seed_used = seed;
    std::ostringstream s;
    s << kSpecsHeader << '\n';
    int id = 0;
    for (double d : ds.diameters)
        for (const auto& shape_text : ds.shapes)
            for (Axis a : ds.axes) {
                if (c.opt.limit && id >= *c.opt.limit) break;
                const auto shape = table::parse_shape(shape_text);
                s << id << ',' << num(d) << ',' << num(shape.x()) << ',' << num(shape.y()) << ',' << num(shape.z())
                  << ',' << to_string(a) << ',' << ds.tests_per_type << ',' << mix_seed(seed, id) << '\n';
                ++id;
            }
    c.io.write("specs.csv", with_schema(kSpecsSchema, s.str()));
    c.log << "gen: " << id << " particle types, " << id * ds.tests_per_type << " tests\n";
    if (id * ds.tests_per_type > 5000)
        c.log << "gen: note: the full table is a long-running campaign (hours to days on one machine)\n";
}

void cmd_simulate(Context& c) {
    const auto specs = read_specs(c.io);
    struct Job {
        const SpecRow* spec;
        int test;
    };
    std::vector<Job> jobs;
    for (const auto& s : specs)
        for (int t = 0; t < s.tests; ++t) jobs.push_back({&s, t});
    if (c.opt.limit) jobs.resize(std::min<std::size_t>(jobs.size(), std::max(0, *c.opt.limit)));

    tessellation::TessellationOptions topt;
    topt.facet_count = c.config.dataset.facet_count;
    std::vector<std::string> lines(jobs.size());
    std::atomic<int> done{0}, valid{0};
    std::mutex log_mu;
    parallel_for(jobs.size(), c.opt.workers, [&](std::size_t i) {
        const auto& job = jobs[i];
        const std::uint64_t pseed = mix_seed(job.spec->type_seed, job.test);
        simulator::CrushRecord rec;
        std::string error;
        try {
            const auto mesh = tessellation::tessellate({job.spec->key.diameter, job.spec->key.shape, topt.facet_count},
                                                       pseed, topt);
            rec = simulator::simulate_crush(mesh, job.spec->key.axis, c.config.czm, c.config.load);
        } catch (const Error& e) {
            rec = {};
            rec.valid = false;
            rec.converged = false;
            error = std::string(to_string(e.kind()));
        }
        rec.particle_id = job.spec->key.label() + "#" + std::to_string(job.test);
        json j = simulator::to_json(rec);
        j["type_id"] = job.spec->type_id;
        j["test_index"] = job.test;
        j["particle_seed"] = pseed;
        if (!error.empty()) j["error"] = error;
        lines[i] = j.dump();
        valid += rec.valid;
        const int n = ++done;
        if (n % 25 == 0 || n == static_cast<int>(jobs.size())) {
            std::lock_guard lock(log_mu);
            c.log << "simulate: " << n << "/" << jobs.size() << "\n" << std::flush;
        }
    });
    std::string out;
    for (const auto& l : lines) out += l + "\n";
    c.io.write("records.jsonl", out);
    c.log << "simulate: " << valid << " of " << jobs.size() << " tests valid\n";
    c.extra["tests"] = jobs.size();
    c.extra["valid"] = valid.load();
}

void cmd_fit_weibull(Context& c) {
    const auto specs = read_specs(c.io);
    const auto records = read_records(c.io);
    std::map<int, std::vector<simulator::CrushRecord>> by_type;
    std::ostringstream strengths;
    strengths << "type_id,test_index,valid,strength\n";
    for (const auto& r : records) {
        by_type[r.type_id].push_back(r.record);
        strengths << r.type_id << ',' << r.test_index << ',' << (r.record.valid ? 1 : 0) << ','
                  << num(r.record.strength) << '\n';
    }
    std::ostringstream s;
    s << kWeibullHeader << '\n';
    int fitted = 0;
    for (const auto& sp : specs) {
        const auto& recs = by_type[sp.type_id];
        weibull::WeibullFit f;
        std::string status = "ok";
        int n_valid = 0;
        for (const auto& r : recs) n_valid += r.valid;
        try {
            if (recs.empty()) throw Error(ErrorKind::MissingInput, "no records");
            f = weibull::fit(weibull::filter_batch(recs, c.config.min_valid), c.config.min_valid);
            ++fitted;
        } catch (const Error& e) {
            status = lower(to_string(e.kind()));
            f = {};
        }
        f.n_valid = n_valid;
        s << sp.type_id << ',' << num(sp.key.diameter) << ',' << num(sp.key.shape.x()) << ','
          << num(sp.key.shape.y()) << ',' << num(sp.key.shape.z()) << ',' << to_string(sp.key.axis) << ','
          << recs.size() << ',' << n_valid << ',' << num(f.m) << ',' << num(f.sigma0) << ',' << num(f.r2) << ','
          << status << '\n';
    }
    c.io.write("weibull.csv", with_schema(kWeibullSchema, s.str()));
    c.io.write("strengths.csv", with_schema(kStrengthsSchema, strengths.str()));
    c.log << "fit-weibull: " << fitted << " of " << specs.size() << " types fitted (min_valid "
          << c.config.min_valid << ")\n";
    c.extra["fitted"] = fitted;
}

std::string features_header() {
    std::string h = "type_id,test_index";
    for (const auto& d : features::registry()) h += "," + d.name;
    for (int k = 1; k <= features::kDistanceCount; ++k) h += ",particle_distance_" + std::to_string(k);
    return h;
}

void cmd_features(Context& c) {
    const auto specs = read_specs(c.io);
    const auto records = read_records(c.io);
    std::map<int, const SpecRow*> spec_of;
    for (const auto& s : specs) spec_of[s.type_id] = &s;
    std::vector<const RecordRow*> jobs;
    for (const auto& r : records)
        if (r.record.valid) {
            if (!spec_of.count(r.type_id)) throw Error(ErrorKind::ShapeMismatch, "record of an unknown type");
            jobs.push_back(&r);
        }
    if (c.opt.limit) jobs.resize(std::min<std::size_t>(jobs.size(), std::max(0, *c.opt.limit)));

    tessellation::TessellationOptions topt;
    topt.facet_count = c.config.dataset.facet_count;
    std::vector<std::optional<FragmentGraph>> graphs(jobs.size());
    std::vector<std::string> errors(jobs.size());
    parallel_for(jobs.size(), c.opt.workers, [&](std::size_t i) {
        const auto& r = *jobs[i];
        const auto& key = spec_of.at(r.type_id)->key;
        try {
            const auto mesh = tessellation::tessellate({key.diameter, key.shape, topt.facet_count}, r.particle_seed, topt);
            auto g = graphset::graph_features(mesh, key, features::compute_pmd(mesh.boundary));
            g.test_index = r.test_index;
            graphs[i] = std::move(g);
        } catch (const Error& e) {
            errors[i] = std::string(to_string(e.kind()));
        }
    });
    std::vector<FragmentGraph> kept;
    std::ostringstream csv;
    csv << features_header() << '\n';
    json skipped = json::array();
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (!graphs[i]) {
            skipped.push_back({{"type_id", jobs[i]->type_id}, {"test_index", jobs[i]->test_index}, {"error", errors[i]}});
            continue;
        }
        csv << jobs[i]->type_id << ',' << jobs[i]->test_index;
        for (int k = 0; k < graphset::kGraphWidth; ++k) csv << ',' << num(graphs[i]->graph[k]);
        csv << '\n';
        kept.push_back(std::move(*graphs[i]));
    }
    c.io.write("features.jsonl", graphs_text(kept));
    c.io.write("features.csv", with_schema(kFeaturesSchema, csv.str()));
    c.log << "features: " << kept.size() << " particles";
    if (!skipped.empty()) c.log << ", " << skipped.size() << " skipped";
    c.log << "\n";
    c.extra["particles"] = kept.size();
    if (!skipped.empty()) c.extra["skipped"] = skipped;
}

void cmd_graphs(Context& c) {
    auto gs = parse_graphs(c.io.read("features.jsonl"));
    std::map<TypeKey, double> label;
    for (const auto& f : read_fits(c.io))
        if (f.status == "ok") label[f.spec.key] = f.fit.sigma0;
    std::vector<FragmentGraph> kept;
    for (auto& g : gs) {
        const auto it = label.find(g.type);
        if (it == label.end()) continue;
        g.label = it->second;
        kept.push_back(std::move(g));
    }
    if (kept.empty()) throw Error(ErrorKind::InsufficientData, "no particle belongs to a fitted type");
    c.io.write("graphs.jsonl", graphs_text(kept));
    c.log << "graphs: " << kept.size() << " labeled graphs over " << label.size() << " types\n";
    c.extra["graphs"] = kept.size();
}

void cmd_split(Context& c) {
    const auto gs = parse_graphs(c.io.read("graphs.jsonl"));
    const std::uint64_t seed = c.opt.seed.value_or(c.config.split_seed);
    c.seed_used = seed;
    const auto split = graphset::make_split(c.task(), graphset::type_keys(gs), seed, c.config.val_fraction);
    std::vector<const FragmentGraph*> train;
    for (const auto& g : gs)
        if (graphset::part_of(split, g.type) == graphset::Part::Train) train.push_back(&g);
    const auto stats = graphset::fit_standardizer(train);
    c.io.write("split_" + c.task_name() + ".json", graphset::to_json(split, stats).dump(1) + "\n");
    c.log << "split " << c.task_name() << ": " << split.train.size() << " train, " << split.val.size() << " val, "
          << split.test.size() << " test types\n";
}

/// Standardized graphs grouped by split part.
struct Prepared {
    graphset::SplitSpec split;
    graphset::Standardizer stats;
    std::vector<FragmentGraph> graphs;  ///< standardized, dataset order
    std::vector<const FragmentGraph*> train, val, test, all;
};

Prepared prepare(Context& c) {
    Prepared p;
    const std::string name = "split_" + c.task_name() + ".json";
    p.split = graphset::split_from_json(json::parse(c.io.read(name)), &p.stats);
    if (p.split.task != c.task()) throw Error(ErrorKind::SchemaMismatch, name + ": task differs");
    for (const auto& g : parse_graphs(c.io.read("graphs.jsonl"))) p.graphs.push_back(p.stats.apply(g));
    for (const auto& g : p.graphs) {
        p.all.push_back(&g);
        switch (graphset::part_of(p.split, g.type)) {
            case graphset::Part::Train: p.train.push_back(&g); break;
            case graphset::Part::Val: p.val.push_back(&g); break;
            case graphset::Part::Test: p.test.push_back(&g); break;
            case graphset::Part::None: throw Error(ErrorKind::ShapeMismatch, "graph type missing from the split");
        }
    }
    if (p.train.empty() || p.val.empty() || p.test.empty())
        throw Error(ErrorKind::InsufficientData, "a split part holds no graphs");
    return p;
}

learn::ModelConfig model_config(Context& c, Ablation a) {
    auto m = apply_ablation(c.config.model, a);
    if (c.opt.seed) m.seed = *c.opt.seed;
    c.seed_used = m.seed;
    m.validate();
    return m;
}

std::string model_name(const std::string& task, Ablation a) {
    return "model_" + task + "_" + std::string(to_string(a)) + ".json";
}

learn::TrainResult fit_model(Context& c, const Prepared& p, const learn::ModelConfig& m) {
    auto r = learn::train(p.train, p.val, m);
    c.log << "train: " << r.history.size() << " epochs, best epoch " << r.best_epoch << ", val MAE "
          << short_num(r.best_val_mae) << " MPa" << (r.diverged ? " (stopped: non-finite loss)" : "") << "\n";
    return r;
}

void cmd_train(Context& c) {
    const auto p = prepare(c);
    const auto a = parse_ablation(c.opt.ablation);
    const auto r = fit_model(c, p, model_config(c, a));
    const auto suffix = c.task_name() + "_" + std::string(to_string(a));
    c.io.write(model_name(c.task_name(), a), learn::checkpoint(r.model).dump() + "\n");
    c.io.write("history_" + suffix + ".csv", with_schema(kHistorySchema, learn::history_csv(r.history)));
    c.extra["best_epoch"] = r.best_epoch;
    c.extra["diverged"] = r.diverged;
}

void cmd_eval(Context& c) {
    const auto p = prepare(c);
    const auto a = parse_ablation(c.opt.ablation);
    const auto model = learn::model_from_checkpoint(json::parse(c.io.read(model_name(c.task_name(), a))));
    std::ostringstream s, pred;
    s << "part,n,mae,rmse\n";
    pred << "part,diameter,sx,sy,sz,axis,test_index,label,prediction\n";
    const std::pair<const char*, const std::vector<const FragmentGraph*>*> parts[] = {
        {"train", &p.train}, {"val", &p.val}, {"test", &p.test}};
    for (const auto& [name, part] : parts) {
        const auto m = learn::evaluate(model, *part);
        s << name << ',' << m.n << ',' << num(m.mae) << ',' << num(m.rmse) << '\n';
        c.log << "eval " << name << ": MAE " << short_num(m.mae) << " MPa, RMSE " << short_num(m.rmse) << " MPa\n";
        for (const auto* g : *part)
            pred << name << ',' << num(g->type.diameter) << ',' << num(g->type.shape.x()) << ','
                 << num(g->type.shape.y()) << ',' << num(g->type.shape.z()) << ',' << to_string(g->type.axis) << ','
                 << g->test_index << ',' << num(g->label) << ',' << num(model.predict(*g)) << '\n';
    }
    const auto suffix = c.task_name() + "_" + std::string(to_string(a));
    c.io.write("eval_" + suffix + ".csv", with_schema(kEvalSchema, s.str()));
    c.io.write("predictions_" + suffix + ".csv", with_schema(kPredictionsSchema, pred.str()));
}

void cmd_ablate(Context& c) {
    const auto p = prepare(c);
    std::ostringstream s;
    s << "task,variant,use_pmd,use_nef,best_epoch,train_mae,train_rmse,val_mae,val_rmse,test_mae,test_rmse,"
         "pmd_attribution_max,nef_attribution_max\n";
    for (Ablation a : {Ablation::Baseline, Ablation::NoPmd, Ablation::NoNef}) {
        c.log << "ablate: " << to_string(a) << "\n";
        const auto m = model_config(c, a);
        auto r = fit_model(c, p, m);
        const auto tr = learn::evaluate(r.model, p.train), va = learn::evaluate(r.model, p.val),
                   te = learn::evaluate(r.model, p.test);
        const auto attr = attribution::attribute(r.model, p.all);
        // node_edge columns: node features, node distances, edge features
        double nef = 0.0;
        const auto& ne = attr.node_edge.values;
        nef = std::max(nef, ne.leftCols(features::kNodeFeatureCount).maxCoeff());
        nef = std::max(nef, ne.rightCols(features::kEdgeFeatureCount).maxCoeff());
        s << c.task_name() << ',' << to_string(a) << ',' << m.use_pmd << ',' << m.use_nef << ',' << r.best_epoch
          << ',' << num(tr.mae) << ',' << num(tr.rmse) << ',' << num(va.mae) << ',' << num(va.rmse) << ','
          << num(te.mae) << ',' << num(te.rmse) << ',' << num(attr.pmd.values.maxCoeff()) << ',' << num(nef) << '\n';
        c.io.write("ablate_" + c.task_name() + "_" + std::string(to_string(a)) + ".json",
                   learn::checkpoint(r.model).dump() + "\n");
    }
    c.io.write("ablation_" + c.task_name() + ".csv", with_schema(kAblationSchema, s.str()));
}

void cmd_attribute(Context& c) {
    const auto p = prepare(c);
    const auto a = parse_ablation(c.opt.ablation);
    auto model = learn::model_from_checkpoint(json::parse(c.io.read(model_name(c.task_name(), a))));
    const auto attr = attribution::attribute(model, p.all);
    const auto raw = attribution::to_raw_units(attr, p.stats);
    c.io.write("attribution_pmd.csv", with_schema(kAttributionSchema, attribution::to_csv(attr.pmd)));
    c.io.write("attribution_nef.csv", with_schema(kAttributionSchema, attribution::to_csv(attr.node_edge)));
    c.io.write("attribution_pmd_raw.csv", with_schema(kAttributionSchema, attribution::to_csv(raw.pmd)));
    c.io.write("attribution_nef_raw.csv", with_schema(kAttributionSchema, attribution::to_csv(raw.node_edge)));
    attribution::HeatmapOptions h;
    h.exclude_last_pmd = c.config.attribution.exclude_last_pmd;
    h.title = "PMD gradient attribution (" + c.task_name() + ")";
    c.io.write("attribution_pmd.svg", attribution::render_heatmap(attr.pmd, h));
    h.exclude_last_pmd = false;
    h.title = "Node and edge feature gradient attribution (" + c.task_name() + ")";
    c.io.write("attribution_nef.svg", attribution::render_heatmap(attr.node_edge, h));
    c.log << "attribute: " << attr.pmd.rows.size() << " types\n";
    c.extra["model_seed"] = model.config().seed;
}

void cmd_stats(Context& c) {
    const auto fits = read_fits(c.io);
    const auto gs = parse_graphs(c.io.read("graphs.jsonl"));
    std::vector<weibull::WeibullFit> ok;
    for (const auto& f : fits)
        if (f.status == "ok") ok.push_back(f.fit);
    if (ok.empty()) throw Error(ErrorKind::InsufficientData, "no fitted type");

    std::vector<std::pair<std::string, std::vector<double>>> columns;
    std::vector<double> s0, m, r2;
    for (const auto& f : ok) s0.push_back(f.sigma0), m.push_back(f.m), r2.push_back(f.r2);
    columns.push_back({"sigma0", s0});
    columns.push_back({"weibull_m", m});
    columns.push_back({"weibull_r2", r2});
    for (int k = 0; k < graphset::kGraphWidth; ++k) {
        std::vector<double> v;
        for (const auto& g : gs) v.push_back(g.graph[k]);
        const std::string name = k < features::kPmdCount
                                     ? features::registry()[k].name
                                     : "particle_distance_" + std::to_string(k - features::kPmdCount + 1);
        columns.push_back({name, v});
    }
    std::ostringstream s;
    s << "quantity,count,min,q25,q50,q75,max\n";
    for (const auto& [name, v] : columns) {
        const auto q = weibull::quantiles(v);
        s << name << ',' << v.size() << ',' << num(q.min) << ',' << num(q.q25) << ',' << num(q.q50) << ','
          << num(q.q75) << ',' << num(q.max) << '\n';
    }
    c.io.write("summary.csv", with_schema(kSummarySchema, s.str()));

    const int per_row = 5;
    const double w = 260, h = 200;
    std::ostringstream body;
    for (std::size_t i = 0; i < columns.size(); ++i) {
        const auto& [name, v] = columns[i];
        const int bins = std::clamp(static_cast<int>(std::sqrt(static_cast<double>(v.size()))), 5, 30);
        panel(body, (i % per_row) * w, (i / per_row) * h, w, h, name, "value", "count",
              {Series{histogram_outline(v, bins), true, "#2a6f97", name}});
    }
    const double rows = std::ceil(columns.size() / static_cast<double>(per_row));
    c.io.write("histograms.svg", svg_document(per_row * w, rows * h, body.str()));
    c.log << "stats: " << ok.size() << " types, " << gs.size() << " particles\n";
}

void cmd_plot(Context& c) {
    const auto specs = read_specs(c.io);
    const auto records = read_records(c.io);
    std::optional<std::vector<FitRow>> fits;
    if (fs::exists(c.io.dir / "weibull.csv")) fits = read_fits(c.io);
    std::map<int, std::vector<const RecordRow*>> by_type;
    for (const auto& r : records) by_type[r.type_id].push_back(&r);
    int types = 0, curves = 0, weibulls = 0;
    for (const auto& sp : specs) {
        const auto it = by_type.find(sp.type_id);
        if (it == by_type.end()) continue;
        if (c.opt.limit && types >= *c.opt.limit) break;
        ++types;
        const RecordRow* first = it->second.front();
        for (const auto* r : it->second)
            if (r->record.valid) {
                first = r;
                break;
            }
        Series curve;
        curve.name = first->record.particle_id;
        const double gap0 = first->record.curve.empty() ? 0.0 : first->record.curve.front().gap;
        for (const auto& pt : first->record.curve) curve.points.push_back({gap0 - pt.gap, pt.force});
        std::ostringstream body;
        panel(body, 0, 0, 560, 380, "Load-displacement, " + first->record.particle_id, "platen displacement (mm)",
              "force (N)", {curve});
        const std::string id = std::to_string(sp.type_id);
        c.io.write("curve_" + id + ".svg", svg_document(560, 380, body.str()));
        std::ostringstream data;
        data << "displacement_mm,force_N\n";
        for (const auto& [x, y] : curve.points) data << num(x) << ',' << num(y) << '\n';
        c.io.write("curve_" + id + ".csv", with_schema(kCurveSchema, data.str()));
        ++curves;

        if (!fits) continue;
        const auto f = std::find_if(fits->begin(), fits->end(),
                                    [&](const FitRow& fr) { return fr.spec.type_id == sp.type_id; });
        if (f == fits->end() || f->status != "ok") continue;
        std::vector<double> strengths;
        for (const auto* r : it->second)
            if (r->record.valid) strengths.push_back(r->record.strength);
        Series pts, line;
        pts.line = false;
        pts.name = "tests";
        for (const auto& [sigma, ps] : weibull::ranked_survival(strengths))
            pts.points.push_back({std::log(sigma), std::log(-std::log(ps))});
        line.colour = "#d62728";
        line.name = "fit";
        const auto [lo, hi] = std::minmax_element(strengths.begin(), strengths.end());
        for (double x : {std::log(*lo), std::log(*hi)})
            line.points.push_back({x, f->fit.m * (x - std::log(f->fit.sigma0))});
        std::ostringstream wb;
        panel(wb, 0, 0, 560, 380,
              "Weibull, " + sp.key.label() + ": m=" + short_num(f->fit.m) + " sigma0=" + short_num(f->fit.sigma0) +
                  " MPa R2=" + short_num(f->fit.r2),
              "ln strength (ln MPa)", "ln(-ln Ps)", {pts, line});
        c.io.write("weibull_" + id + ".svg", svg_document(560, 380, wb.str()));
        ++weibulls;
    }
    if (curves == 0) throw Error(ErrorKind::InsufficientData, "no records to plot");
    c.log << "plot: " << curves << " load-displacement and " << weibulls << " Weibull figures\n";
}

const std::map<std::string, void (*)(Context&)>& command_table() {
    static const std::map<std::string, void (*)(Context&)> t = {
        {"gen", cmd_gen},         {"simulate", cmd_simulate}, {"fit-weibull", cmd_fit_weibull},
        {"features", cmd_features}, {"graphs", cmd_graphs},   {"split", cmd_split},
        {"train", cmd_train},     {"eval", cmd_eval},         {"ablate", cmd_ablate},
        {"attribute", cmd_attribute}, {"stats", cmd_stats},   {"plot", cmd_plot}};
    return t;
}

int exit_code(ErrorKind k) {
    switch (k) {
        case ErrorKind::Config:
        case ErrorKind::UnknownTask: return kUsage;
        case ErrorKind::MissingInput: return kMissingInput;
        case ErrorKind::SchemaMismatch:
        case ErrorKind::ShapeMismatch: return kSchema;
        default: return kStageFailure;
    }
}

}  // namespace

PipelineConfig default_config() {
    PipelineConfig c;
    c.dataset.diameters = table::diameters();
    c.dataset.shapes = table::shape_texts();
    c.dataset.axes = {Axis::X, Axis::Y, Axis::Z};
    return c;
}

PipelineConfig parse_config(const std::string& text) {
    boost::property_tree::ptree tree;
    std::istringstream in(text);
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw Error(ErrorKind::Config, e.message() + " at line " + std::to_string(e.line()));
    }
    if (tree.get<std::string>("meta.schema", "") != kConfigSchema)
        throw Error(ErrorKind::SchemaMismatch, std::string("config: expected [meta] schema = ") + kConfigSchema);
    auto c = default_config();
    for (const auto& [section, keys] : tree) {
        if (keys.empty()) throw Error(ErrorKind::Config, "key outside a section: " + section);
        for (const auto& [key, value] : keys) {
            const std::string full = section + "." + key;
            const auto it = setters().find(full);
            if (it == setters().end()) throw Error(ErrorKind::Config, "unknown key " + full);
            it->second(c, full, trim(value.data()));
        }
    }
    validate(c);
    return c;
}

fs::path resolve_config(const std::string& name) {
    std::string n = name;
    if (n.empty()) {
        const char* env = std::getenv(kConfigEnv);
        n = env && *env ? env : "default";
    }
    if (n.find('/') == std::string::npos && !n.ends_with(".ini")) return fs::path(CRUSH_CONFIG_DIR) / (n + ".ini");
    return n;
}

std::string_view to_string(Ablation a) {
    switch (a) {
        case Ablation::Baseline: return "baseline";
        case Ablation::NoPmd: return "no-pmd";
        case Ablation::NoNef: return "no-nef";
    }
    return "?";
}

Ablation parse_ablation(std::string_view text) {
    for (Ablation a : {Ablation::Baseline, Ablation::NoPmd, Ablation::NoNef})
        if (to_string(a) == text) return a;
    throw Error(ErrorKind::Config, "unknown ablation " + std::string(text));
}

learn::ModelConfig apply_ablation(learn::ModelConfig config, Ablation a) {
    if (a == Ablation::NoPmd) {
        config.use_pmd = false;
        if (config.arch == learn::Arch::Hybrid) config.arch = learn::Arch::Gnn;
    }
    if (a == Ablation::NoNef) config.use_nef = false;
    return config;
}

const std::vector<std::string>& commands() {
    static const std::vector<std::string> c = [] {
        std::vector<std::string> out;
        for (const auto& [name, fn] : command_table()) out.push_back(name);
        return out;
    }();
    return c;
}

std::string sha256_file(const fs::path& path) {
    const auto data = read_text(path);
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw Error(ErrorKind::NonFinite, "sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) out += {hex[md[i] >> 4], hex[md[i] & 15]};
    return out;
}

int run(const Options& options, std::ostream& log) {
    try {
        const auto it = command_table().find(options.command);
        if (it == command_table().end()) throw Error(ErrorKind::Config, "unknown command " + options.command);
        const auto cfg_path = resolve_config(options.config);
        if (!fs::exists(cfg_path)) throw Error(ErrorKind::Config, "config not found: " + cfg_path.string());
        Context c{options, parse_config(read_text(cfg_path)), sha256_file(cfg_path), log, Io{options.out}, {}, {}};
        if (options.command == "attribute" && !c.opt.task) c.opt.task = c.config.attribution.task;
        const std::set<std::string> needs_task = {"split", "train", "eval", "ablate", "attribute"};
        if (needs_task.count(options.command)) c.task();
        parse_ablation(c.opt.ablation);
        fs::create_directories(options.out);
        it->second(c);
        const Options& o = c.opt;

        json entry = {{"command", o.command}, {"config", c.config_hash}, {"inputs", c.io.inputs},
                      {"outputs", c.io.outputs}};
        std::string key = o.command;
        if (o.task) {
            entry["task"] = *o.task;
            key += ":" + std::string(graphset::to_string(graphset::parse_task(*o.task)));
        }
        if (o.command == "train" || o.command == "eval" || o.command == "attribute") {
            entry["ablation"] = o.ablation;
            key += ":" + o.ablation;
        }
        if (o.limit) entry["limit"] = *o.limit;
        if (c.seed_used) entry["seed"] = *c.seed_used;
        for (auto& [k, v] : c.extra.items()) entry[k] = v;
        record_manifest(options.out, key, entry);
        return kOk;
    } catch (const Error& e) {
        log << "error: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const nlohmann::json::exception& e) {
        log << "error: malformed input: " << e.what() << "\n";
        return kSchema;
    } catch (const std::exception& e) {
        log << "error: unexpected: " << e.what() << "\n";
        return kInternal;
    }
}

}  // namespace crush::pipeline
