#include "instrexp/cli.hpp"

#include <openssl/evp.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <charconv>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "instrexp/dataset.hpp"
#include "instrexp/embedding.hpp"
#include "instrexp/error.hpp"
#include "instrexp/expansion.hpp"
#include "instrexp/io.hpp"
#include "instrexp/llm.hpp"
#include "instrexp/postfilter.hpp"
#include "instrexp/ppg.hpp"
#include "instrexp/sampler.hpp"
#include "instrexp/stats.hpp"

#ifndef INSTREXP_VERSION
#define INSTREXP_VERSION "0.0.0"
#endif

namespace instrexp::cli {

namespace fs = std::filesystem;
using io::json;
using io::ojson;

namespace {

const std::vector<std::string> kCommands = {"expand", "filter", "score", "dist",
                                            "build",  "stats",  "pipeline", "bootstrap"};

struct Globals {
    int jobs = 4;
    std::string backend = "mock";
    std::string fixtures;
    std::string embedder = "stub";
    bool dump_masks = false;
    bool fix_typos = false;
    bool json_errors = false;
    bool verbose = false;
};

struct ExpandOpts {
    std::string mode = "single";
    int iterations = 2;
    double temperature = 0.6;
    std::string ladder = "0.50:1.00:0.05";
    std::size_t target_count = 0;  // 0 = no target
};

struct FilterOpts {
    std::string match = "unordered";
    bool no_length_filter = false;
    double ratio_cap = 3.0;
    int word_cap = 60;
};

struct Paths {
    std::string templates, guiding, instances, in, valid, pools, dist, out, report, all_templates, out_dir;
};

struct Options {
    Globals g;
    ExpandOpts expand;
    FilterOpts filter;
    Paths p;
    std::uint64_t seed = 0;
    std::size_t n_siblings = sampler::kDefaultSiblings;
    double softmax_temp = 1.0;
    std::string epsilon = "default";
    std::size_t cap = 1000;
    int max_redraws = 3;
    std::size_t sample_cap = 1000;
    int count = 5;
    std::string config;
};

// ---------------------------------------------------------------------------
// Config files: a JSON object or TOML, keys named like the long flags. Values
// become "--key=value" arguments placed ahead of the command-line ones, so an
// explicit flag wins.

std::string scalar_to_arg(const json& v, const std::string& key) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw Error(ErrorCode::InvalidArgument, "config key '" + key + "' must be a scalar");
}

std::vector<std::pair<std::string, std::string>> load_config(const std::string& path, const std::string& command) {
    auto body = io::read_file(path);
    std::vector<std::pair<std::string, std::string>> items;
    auto first = body.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && body[first] == '{') {
        auto doc = json::parse(body, nullptr, false);
        if (doc.is_discarded() || !doc.is_object()) {
            throw Error(ErrorCode::SchemaError, path + ": not a valid JSON object");
        }
        for (const auto& [k, v] : doc.items()) {
            if (v.is_object()) {
                if (k != command) continue;  // sections for other commands
                for (const auto& [k2, v2] : v.items()) items.emplace_back(k2, scalar_to_arg(v2, k2));
            } else {
                items.emplace_back(k, scalar_to_arg(v, k));
            }
        }
    } else {
        std::istringstream in(body);
        std::vector<CLI::ConfigItem> parsed;
        try {
            parsed = CLI::ConfigTOML{}.from_config(in);
        } catch (const CLI::ParseError& e) {
            throw Error(ErrorCode::SchemaError, path + ": " + e.what());
        }
        for (const auto& item : parsed) {
            if (item.name.empty() || item.name == "++" || item.name == "--") continue;
            if (!item.parents.empty() && item.parents.front() != command) continue;
            if (item.inputs.size() != 1) {
                throw Error(ErrorCode::InvalidArgument, "config key '" + item.name + "' must be a scalar");
            }
            items.emplace_back(item.name, item.inputs.front());
        }
    }
    for (auto& [k, _] : items) std::replace(k.begin(), k.end(), '_', '-');
    return items;
}

/// Remove "--config PATH" and splice the file's values in after the command name.
std::vector<std::string> expand_config(std::vector<std::string> args, std::string& config_path) {
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            config_path = args[i + 1];
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            config_path = args[i].substr(9);
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
            break;
        }
    }
    if (config_path.empty()) return args;
    if (!fs::exists(config_path)) throw Error(ErrorCode::IoError, "input file not found: " + config_path);

    auto cmd = std::find_first_of(args.begin(), args.end(), kCommands.begin(), kCommands.end());
    if (cmd == args.end()) return args;
    auto items = load_config(config_path, *cmd);
    std::vector<std::string> injected;
    for (const auto& [k, v] : items) injected.push_back("--" + k + "=" + v);
    args.insert(cmd + 1, injected.begin(), injected.end());
    return args;
}

// ---------------------------------------------------------------------------
// Manifests

std::string utc_timestamp() {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

ojson typed_value(const std::string& s) {
    if (s == "true") return true;
    if (s == "false") return false;
    double d = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), d);
    if (ec == std::errc() && ptr == s.data() + s.size() && !s.empty()) {
        long long i = 0;
        auto [p2, e2] = std::from_chars(s.data(), s.data() + s.size(), i);
        if (e2 == std::errc() && p2 == s.data() + s.size()) return i;
        return d;
    }
    return s;
}

/// Every option of the root app and the chosen command, as resolved.
ojson config_snapshot(const CLI::App& root, const CLI::App& sub) {
    ojson snap = ojson::object();
    auto take = [&](const CLI::App& app) {
        for (const auto* opt : app.get_options()) {
            auto name = opt->get_single_name();
            if (name.empty() || name == "help" || name == "config") continue;
            if (opt->get_expected_max() == 0) {
                snap[name] = opt->count() > 0 && opt->as<bool>();
                continue;
            }
            const auto& res = opt->results();
            snap[name] = typed_value(res.empty() ? opt->get_default_str() : res.back());
        }
    };
    take(root);
    take(sub);
    return snap;
}

struct ManifestWriter {
    std::string command;
    ojson snapshot;
    std::vector<std::string> inputs;
    std::uint64_t seed = 0;

    void write_for(const std::string& output) const {
        ojson digests = ojson::object();
        for (const auto& in : inputs) {
            if (!in.empty()) digests[in] = file_digest(in);
        }
        ojson m;
        m["command"] = command;
        m["output"] = output;
        m["config_snapshot"] = snapshot;
        m["input_digests"] = digests;
        m["seed"] = seed;
        m["tool_version"] = INSTREXP_VERSION;
        m["timestamp"] = utc_timestamp();
        io::write_file(output + ".manifest.json", m.dump(2) + "\n");
    }
};

// ---------------------------------------------------------------------------

void require_file(const std::string& path, const char* what) {
    if (path.empty()) throw Error(ErrorCode::InvalidArgument, std::string("missing --") + what);
    if (!fs::is_regular_file(path)) throw Error(ErrorCode::IoError, "input file not found: " + path);
}

std::shared_ptr<llm::ChatGateway> make_gateway(const Globals& g) {
    llm::GatewayOptions opts;
    opts.max_concurrency = g.jobs;
    std::shared_ptr<llm::ChatBackend> backend;
    if (g.backend == "mock") {
        require_file(g.fixtures, "fixtures");
        backend = llm::MockChatBackend::from_file(g.fixtures);
    } else {
        auto ep = llm::HttpEndpoint::from_env();
        opts.default_model = ep.model;
        backend = std::make_shared<llm::HttpChatBackend>(std::move(ep));
    }
    return std::make_shared<llm::ChatGateway>(std::move(backend), opts);
}

std::unique_ptr<embed::Embedder> make_embedder(const Globals& g) {
    if (g.embedder == "stub") return std::make_unique<embed::StubEmbedder>();
    return std::make_unique<embed::HttpEmbedder>(embed::EmbeddingEndpoint::from_env());
}

filter::FilterConfig filter_config(const FilterOpts& f) {
    filter::FilterConfig cfg;
    cfg.match_mode = f.match == "ordered" ? ppg::MatchMode::Ordered : ppg::MatchMode::Unordered;
    cfg.length_filter_enabled = !f.no_length_filter;
    cfg.length_ratio_cap = f.ratio_cap;
    cfg.absolute_word_cap = f.word_cap;
    cfg.validate();
    return cfg;
}

expand::ExpansionConfig expansion_config(const Options& o) {
    expand::ExpansionConfig cfg;
    cfg.mode = expand::mode_from_string(o.expand.mode);
    cfg.iterations = o.expand.iterations;
    cfg.temperature = o.expand.temperature;
    cfg.temperature_ladder = expand::parse_ladder(o.expand.ladder);
    if (o.expand.target_count > 0) cfg.target_count = o.expand.target_count;
    cfg.seed = o.seed;
    cfg.jobs = o.g.jobs;
    cfg.validate();
    return cfg;
}

std::vector<InstructionTemplate> read_raw_templates(const std::string& path) {
    auto ts = io::read_templates(path);
    std::vector<InstructionTemplate> raw;
    for (auto& t : ts) {
        if (t.origin == Origin::Raw) raw.push_back(std::move(t));
    }
    if (raw.empty()) throw Error(ErrorCode::SchemaError, path + ": no raw templates");
    return raw;
}

void dump_masks(const std::vector<InstructionTemplate>& raw, const std::string& out) {
    ojson doc = ojson::object();
    for (const auto& t : raw) {
        auto m = ppg::mask_placeholders(t);
        doc[t.template_id] = ojson{{"masked_text", m.masked_text}, {"masks", io::to_json(m.masks)}};
    }
    io::write_file(out + ".masks.json", doc.dump(2) + "\n");
}

std::vector<InstructionTemplate> with_generated(std::vector<InstructionTemplate> raw,
                                                const std::vector<GenerationCandidate>& valid) {
    for (const auto& c : valid) raw.push_back(to_template(c));
    return raw;
}

std::vector<sampler::TaskPool> distributions(std::vector<sampler::TaskPool> pools, const sampler::EpsilonMode& mode,
                                             double softmax_temp) {
    for (auto& p : pools) {
        double eps = 1.0;
        if (p.generated.empty()) {
            if (mode.kind != sampler::EpsilonMode::Kind::Default) {
                spdlog::warn("task {}: no generated templates, using epsilon = 1", p.task_id);
            }
        } else {
            eps = mode.resolve(p);
        }
        p = sampler::build_distribution(std::move(p), eps, softmax_temp);
    }
    return pools;
}

ojson stats_json(const std::vector<InstructionTemplate>& templates, const std::vector<InstanceRecord>* instances,
                 std::size_t sample_cap, std::uint64_t seed) {
    ojson doc;
    doc["corpus"] = io::to_json(stats::corpus_stats(templates));

    std::map<std::string, std::vector<InstructionTemplate>> by_task;
    for (const auto& t : templates) by_task[t.task_id].push_back(t);
    std::map<std::string, std::vector<InstanceRecord>> inst_by_task;
    if (instances) {
        for (const auto& x : *instances) inst_by_task[x.task_id].push_back(x);
    }

    ojson tasks = ojson::array();
    for (const auto& [task, ts] : by_task) {
        auto cs = stats::corpus_stats(ts);
        auto attrs = stats::task_attributes(task, ts);
        ojson row;
        row["task_id"] = task;
        row["n_instructions"] = cs.n_instructions;
        row["avg_word_length"] = cs.avg_word_length;
        row["direct_question"] = attrs.direct_question;
        row["option_inclusive"] = attrs.option_inclusive;
        row["heuristic"] = attrs.heuristic;
        if (instances) {
            auto rng = Rng::derive(seed, "proportion:" + task);
            const auto& xs = inst_by_task[task];
            auto prop = stats::template_text_proportion(ts, xs, sample_cap, rng);
            row["template_text_proportion"] = prop.pairs > 0 ? ojson(prop.mean) : ojson(nullptr);
            row["proportion_pairs"] = prop.pairs;
            row["proportion_skipped"] = prop.skipped;
        }
        tasks.push_back(row);
    }
    doc["tasks"] = tasks;
    return doc;
}

// ---------------------------------------------------------------------------
// Commands

struct Run {
    Options& o;
    const CLI::App& root;
    const CLI::App& sub;
    std::ostream& out;

    ManifestWriter manifest(std::vector<std::string> inputs) const {
        inputs.push_back(o.config);
        if (o.g.backend == "mock") inputs.push_back(o.g.fixtures);
        return ManifestWriter{sub.get_name(), config_snapshot(root, sub), std::move(inputs), o.seed};
    }

    void expand_cmd() {
        require_file(o.p.templates, "templates");
        require_file(o.p.guiding, "guiding");
        if (o.p.out.empty()) throw Error(ErrorCode::InvalidArgument, "missing --out");
        auto raw = read_raw_templates(o.p.templates);
        auto guiding = io::read_guiding(o.p.guiding);
        auto fcfg = filter_config(o.filter);
        auto ecfg = expansion_config(o);
        auto gateway = make_gateway(o.g);

        expand::Journal journal(o.p.out + ".journal");
        expand::Expander expander(*gateway, fcfg, ecfg, &journal);
        auto result = expander.run(raw, guiding);
        io::write_candidates(o.p.out, result.candidates);
        if (o.g.dump_masks) dump_masks(raw, o.p.out);
        if (!o.p.report.empty()) io::write_file(o.p.report, io::to_json(result.report).dump(2) + "\n");
        journal.discard();

        auto m = manifest({o.p.templates, o.p.guiding});
        m.write_for(o.p.out);
        if (!o.p.report.empty()) m.write_for(o.p.report);
        out << "expand: " << result.candidates.size() << " candidates, " << result.report.total().valid
            << " valid, " << result.generation_passes << " passes\n";
    }

    void filter_cmd() {
        require_file(o.p.in, "in");
        require_file(o.p.templates, "templates");
        if (o.p.out.empty()) throw Error(ErrorCode::InvalidArgument, "missing --out");
        auto cands = io::read_candidates(o.p.in);
        auto raw = read_raw_templates(o.p.templates);
        auto result = filter::run_pipeline(cands, raw, filter_config(o.filter));
        io::write_candidates(o.p.out, result.valid);
        if (!o.p.report.empty()) io::write_file(o.p.report, io::to_json(result.report).dump(2) + "\n");

        auto m = manifest({o.p.in, o.p.templates});
        m.write_for(o.p.out);
        if (!o.p.report.empty()) m.write_for(o.p.report);
        out << "filter: " << result.valid.size() << " of " << result.candidates.size() << " valid\n";
    }

    std::vector<sampler::TaskPool> scored_pools(const std::vector<InstructionTemplate>& all) {
        auto pools = sampler::make_pools(all);
        auto embedder = make_embedder(o.g);
        sampler::score_pools(pools, all, *embedder, o.n_siblings, o.seed);
        return pools;
    }

    void score_cmd() {
        require_file(o.p.valid, "valid");
        require_file(o.p.templates, "templates");
        if (o.p.out.empty()) throw Error(ErrorCode::InvalidArgument, "missing --out");
        auto valid = io::read_candidates(o.p.valid);
        auto all = with_generated(read_raw_templates(o.p.templates), valid);
        auto pools = scored_pools(all);
        io::write_pools(o.p.out, pools);
        if (!o.p.all_templates.empty()) io::write_templates(o.p.all_templates, all);

        auto m = manifest({o.p.valid, o.p.templates});
        m.write_for(o.p.out);
        if (!o.p.all_templates.empty()) m.write_for(o.p.all_templates);
        out << "score: " << pools.size() << " pools\n";
    }

    void dist_cmd() {
        auto mode = sampler::EpsilonMode::parse(o.epsilon);
        require_file(o.p.pools, "pools");
        if (o.p.out.empty()) throw Error(ErrorCode::InvalidArgument, "missing --out");
        auto pools = distributions(io::read_pools(o.p.pools), mode, o.softmax_temp);
        io::write_pools(o.p.out, pools, ojson{{"epsilon_mode", mode.to_string()}});
        manifest({o.p.pools}).write_for(o.p.out);
        out << "dist: " << pools.size() << " distributions\n";
    }

    dataset::BuildConfig build_config() const {
        dataset::BuildConfig cfg;
        cfg.per_task_cap = o.cap;
        cfg.seed = o.seed;
        cfg.epsilon_mode = sampler::EpsilonMode::parse(o.epsilon);
        cfg.max_redraws = o.max_redraws;
        cfg.jobs = o.g.jobs;
        return cfg;
    }

    void build_cmd() {
        require_file(o.p.instances, "instances");
        require_file(o.p.dist, "dist");
        require_file(o.p.templates, "templates");
        if (o.p.out.empty()) throw Error(ErrorCode::InvalidArgument, "missing --out");
        auto instances = io::read_instances(o.p.instances);
        auto pools = io::read_pools(o.p.dist);
        auto templates = io::read_templates(o.p.templates);
        auto result = dataset::build_dataset(instances, pools, templates, build_config());
        io::write_records(o.p.out, result.records);
        if (!o.p.report.empty()) io::write_file(o.p.report, io::to_json(result.report).dump(2) + "\n");

        auto m = manifest({o.p.instances, o.p.dist, o.p.templates});
        m.write_for(o.p.out);
        if (!o.p.report.empty()) m.write_for(o.p.report);
        out << "build: " << result.records.size() << " records\n";
    }

    void stats_cmd() {
        require_file(o.p.templates, "templates");
        if (o.p.out.empty()) throw Error(ErrorCode::InvalidArgument, "missing --out");
        auto templates = io::read_templates(o.p.templates);
        std::vector<InstanceRecord> instances;
        if (!o.p.instances.empty()) {
            require_file(o.p.instances, "instances");
            instances = io::read_instances(o.p.instances);
        }
        auto doc = stats_json(templates, o.p.instances.empty() ? nullptr : &instances, o.sample_cap, o.seed);
        io::write_file(o.p.out, doc.dump(2) + "\n");
        manifest({o.p.templates, o.p.instances}).write_for(o.p.out);
        out << "stats: " << templates.size() << " templates\n";
    }

    void bootstrap_cmd() {
        if (o.p.out.empty()) throw Error(ErrorCode::InvalidArgument, "missing --out");
        auto gateway = make_gateway(o.g);
        auto guiding = gateway->bootstrap_guiding_instructions(o.count, o.g.fix_typos, o.expand.temperature);
        io::write_guiding(o.p.out, guiding);
        manifest({}).write_for(o.p.out);
        out << "bootstrap: " << guiding.size() << " guiding instructions\n";
    }

    void pipeline_cmd() {
        require_file(o.p.templates, "templates");
        require_file(o.p.instances, "instances");
        if (o.p.out_dir.empty()) throw Error(ErrorCode::InvalidArgument, "missing --out-dir");
        fs::create_directories(o.p.out_dir);
        auto path = [&](const char* name) { return (fs::path(o.p.out_dir) / name).string(); };

        auto raw = read_raw_templates(o.p.templates);
        auto instances = io::read_instances(o.p.instances);
        auto gateway = make_gateway(o.g);

        std::vector<llm::GuidingInstruction> guiding;
        if (!o.p.guiding.empty()) {
            require_file(o.p.guiding, "guiding");
            guiding = io::read_guiding(o.p.guiding);
        } else {
            guiding = gateway->bootstrap_guiding_instructions(o.count, o.g.fix_typos, o.expand.temperature);
            io::write_guiding(path("guiding.jsonl"), guiding);
        }

        const auto candidates_path = path("candidates.jsonl");
        expand::Journal journal(candidates_path + ".journal");
        expand::Expander expander(*gateway, filter_config(o.filter), expansion_config(o), &journal);
        auto expansion = expander.run(raw, guiding);
        auto valid = expansion.valid();
        io::write_candidates(candidates_path, expansion.candidates);
        io::write_file(path("filter_report.json"), io::to_json(expansion.report).dump(2) + "\n");
        io::write_candidates(path("valid.jsonl"), valid);
        if (o.g.dump_masks) dump_masks(raw, candidates_path);
        journal.discard();

        auto all = with_generated(raw, valid);
        io::write_templates(path("all_templates.jsonl"), all);
        auto pools = scored_pools(all);
        io::write_pools(path("pools.json"), pools);

        auto mode = sampler::EpsilonMode::parse(o.epsilon);
        pools = distributions(std::move(pools), mode, o.softmax_temp);
        io::write_pools(path("dist.json"), pools, ojson{{"epsilon_mode", mode.to_string()}});

        auto built = dataset::build_dataset(instances, pools, all, build_config());
        io::write_records(path("dataset.jsonl"), built.records);
        io::write_file(path("build_report.json"), io::to_json(built.report).dump(2) + "\n");

        auto m = manifest({o.p.templates, o.p.instances, o.p.guiding});
        for (const auto* name : {"candidates.jsonl", "filter_report.json", "valid.jsonl", "all_templates.jsonl",
                                 "pools.json", "dist.json", "dataset.jsonl", "build_report.json"}) {
            m.write_for(path(name));
        }
        if (o.p.guiding.empty()) m.write_for(path("guiding.jsonl"));
        out << "pipeline: " << expansion.candidates.size() << " candidates, " << valid.size() << " valid, "
            << built.records.size() << " records\n";
    }
};

// ---------------------------------------------------------------------------
// Option wiring

void add_expand_opts(CLI::App* c, Options& o) {
    c->add_option("--mode", o.expand.mode, "Expansion regime")->check(CLI::IsMember({"single", "iter", "mt"}));
    c->add_option("--iterations", o.expand.iterations, "Rounds for iter mode")->check(CLI::PositiveNumber);
    c->add_option("--temperature", o.expand.temperature, "Sampling temperature for single/iter");
    c->add_option("--ladder", o.expand.ladder, "Temperature ladder a:b:step for mt mode");
    c->add_option("--target-count", o.expand.target_count, "Stop once this many valid candidates exist (0 = off)");
}

void add_filter_opts(CLI::App* c, Options& o) {
    c->add_option("--match", o.filter.match, "Placeholder match mode")->check(CLI::IsMember({"unordered", "ordered"}));
    c->add_flag("--no-length-filter", o.filter.no_length_filter, "Disable the length filter");
    c->add_option("--ratio-cap", o.filter.ratio_cap, "Maximum candidate/original word ratio");
    c->add_option("--word-cap", o.filter.word_cap, "Absolute word cap");
}

void add_score_opts(CLI::App* c, Options& o) {
    c->add_option("--n-siblings", o.n_siblings, "Siblings sampled for the diversity term");
}

void add_dist_opts(CLI::App* c, Options& o) {
    c->add_option("--epsilon", o.epsilon, "default | fixed:F | half | double");
    c->add_option("--softmax-temp", o.softmax_temp, "Softmax temperature over scores")->check(CLI::PositiveNumber);
}

void add_build_opts(CLI::App* c, Options& o) {
    c->add_option("--cap", o.cap, "Instances per task")->check(CLI::PositiveNumber);
    c->add_option("--max-redraws", o.max_redraws, "Template redraws per failing instance")->check(CLI::NonNegativeNumber);
}

void add_config_opt(CLI::App* c, Options& o) {
    c->add_option("--config", o.config, "JSON or TOML file with option values (flags take precedence)");
}

int fail(const Options& o, std::ostream& err, int code, std::string_view kind, const std::string& message) {
    if (o.g.json_errors) {
        err << ojson{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << "\n";
    } else {
        err << "error: " << message << "\n";
    }
    return code;
}

}  // namespace

std::string file_digest(const std::string& path) {
    auto bytes = io::read_file(path);
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorCode::IoError, "cannot hash '" + path + "'");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string hex = "sha256:";
    for (unsigned int i = 0; i < len; ++i) {
        hex += kHex[md[i] >> 4];
        hex += kHex[md[i] & 0xf];
    }
    return hex;
}

int run(const std::vector<std::string>& input, std::ostream& out, std::ostream& err) {
    Options o;
    o.g.json_errors = std::find(input.begin(), input.end(), "--json-errors") != input.end();

    CLI::App app{"instrexp: expand instruction templates and build instruction datasets", "instrexp"};
    app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);

    app.add_option("--jobs", o.g.jobs, "Worker cap across stages")->check(CLI::PositiveNumber);
    app.add_option("--backend", o.g.backend, "LLM backend")->check(CLI::IsMember({"mock", "http"}));
    app.add_option("--fixtures", o.g.fixtures, "Mock backend fixtures (JSONL)");
    app.add_option("--embedder", o.g.embedder, "Embedding backend")->check(CLI::IsMember({"stub", "http"}));
    app.add_flag("--dump-masks", o.g.dump_masks, "Write the mask maps next to the candidates");
    app.add_flag("--fix-typos", o.g.fix_typos, "Correct the typo in the bootstrap meta-prompt");
    app.add_flag("--json-errors", o.g.json_errors, "Print errors as one JSON line");
    app.add_flag("-v,--verbose", o.g.verbose, "Log progress to stderr");

    auto* expand = app.add_subcommand("expand", "Generate candidate rewrites of raw templates")->fallthrough();
    expand->add_option("--templates", o.p.templates, "Raw templates (JSONL)");
    expand->add_option("--guiding", o.p.guiding, "Guiding instructions (JSONL)");
    expand->add_option("--out", o.p.out, "Candidates (JSONL)");
    expand->add_option("--report", o.p.report, "Filter report (JSON)");
    expand->add_option("--seed", o.seed, "Seed");
    add_expand_opts(expand, o);
    add_filter_opts(expand, o);
    add_config_opt(expand, o);

    auto* filt = app.add_subcommand("filter", "Re-run the filters over a candidate file")->fallthrough();
    filt->add_option("--in", o.p.in, "Candidates (JSONL)");
    filt->add_option("--templates", o.p.templates, "Raw templates (JSONL)");
    filt->add_option("--out", o.p.out, "Valid candidates (JSONL)");
    filt->add_option("--report", o.p.report, "Filter report (JSON)");
    add_filter_opts(filt, o);
    add_config_opt(filt, o);

    auto* score = app.add_subcommand("score", "Score generated templates and group them into pools")->fallthrough();
    score->add_option("--valid", o.p.valid, "Valid candidates (JSONL)");
    score->add_option("--templates", o.p.templates, "Raw templates (JSONL)");
    score->add_option("--out", o.p.out, "Pools (JSON)");
    score->add_option("--all-templates", o.p.all_templates, "Also write raw plus generated templates (JSONL)");
    score->add_option("--seed", o.seed, "Seed");
    add_score_opts(score, o);
    add_config_opt(score, o);

    auto* dist = app.add_subcommand("dist", "Build per-task sampling distributions")->fallthrough();
    dist->add_option("--pools", o.p.pools, "Pools (JSON)");
    dist->add_option("--out", o.p.out, "Distributions (JSON)");
    add_dist_opts(dist, o);
    add_config_opt(dist, o);

    auto* build = app.add_subcommand("build", "Instantiate the dataset")->fallthrough();
    build->add_option("--instances", o.p.instances, "Instances (JSONL)");
    build->add_option("--dist", o.p.dist, "Distributions (JSON)");
    build->add_option("--templates", o.p.templates, "All templates (JSONL)");
    build->add_option("--out", o.p.out, "Dataset (JSONL)");
    build->add_option("--report", o.p.report, "Build report (JSON)");
    build->add_option("--seed", o.seed, "Seed")->default_val(42);
    build->add_option("--epsilon", o.epsilon, "Epsilon for pools without a distribution");
    add_build_opts(build, o);
    add_config_opt(build, o);

    auto* st = app.add_subcommand("stats", "Corpus statistics")->fallthrough();
    st->add_option("--templates", o.p.templates, "Templates (JSONL)");
    st->add_option("--instances", o.p.instances, "Instances for the template text proportion (JSONL)");
    st->add_option("--sample-cap", o.sample_cap, "Pairs sampled per task");
    st->add_option("--seed", o.seed, "Seed");
    st->add_option("--out", o.p.out, "Statistics (JSON)");
    add_config_opt(st, o);

    auto* pipe = app.add_subcommand("pipeline", "Run expand, filter, score, dist and build in one go")->fallthrough();
    pipe->add_option("--templates", o.p.templates, "Raw templates (JSONL)");
    pipe->add_option("--guiding", o.p.guiding, "Guiding instructions (JSONL); bootstrapped when absent");
    pipe->add_option("--instances", o.p.instances, "Instances (JSONL)");
    pipe->add_option("--out-dir", o.p.out_dir, "Output directory");
    pipe->add_option("--seed", o.seed, "Seed")->default_val(42);
    pipe->add_option("--count", o.count, "Guiding instructions to bootstrap");
    add_expand_opts(pipe, o);
    add_filter_opts(pipe, o);
    add_score_opts(pipe, o);
    add_dist_opts(pipe, o);
    add_build_opts(pipe, o);
    add_config_opt(pipe, o);

    auto* boot = app.add_subcommand("bootstrap", "Ask the LLM for guiding instructions")->fallthrough();
    boot->add_option("--count", o.count, "Number of guiding instructions")->check(CLI::PositiveNumber);
    boot->add_option("--temperature", o.expand.temperature, "Sampling temperature");
    boot->add_option("--out", o.p.out, "Guiding instructions (JSONL)");
    add_config_opt(boot, o);

    std::vector<std::string> args;
    try {
        args = expand_config(input, o.config);
    } catch (const Error& e) {
        return fail(o, err, classify(e.code()) == ErrorClass::Usage ? kUsage : kData, to_string(e.code()), e.detail());
    }

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        std::string message = e.what();
        if (app.get_subcommands().empty()) {
            auto cmd = std::find_if(args.begin(), args.end(), [](const std::string& a) { return a.rfind("-", 0) != 0; });
            if (cmd != args.end() && std::find(kCommands.begin(), kCommands.end(), *cmd) == kCommands.end()) {
                message = "unknown subcommand '" + *cmd + "'";
            }
        }
        if (!o.g.json_errors) err << app.help();
        return fail(o, err, kUsage, "UsageError", message);
    }

    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
    auto logger = std::make_shared<spdlog::logger>("instrexp", sink);
    logger->set_pattern("[%l] %v");
    logger->set_level(o.g.verbose ? spdlog::level::info : spdlog::level::warn);
    auto previous = spdlog::default_logger();
    spdlog::set_default_logger(logger);
    struct Restore {
        std::shared_ptr<spdlog::logger> prev;
        ~Restore() { spdlog::set_default_logger(prev); }
    } restore{previous};

    const CLI::App* sub = app.get_subcommands().front();
    Run r{o, app, *sub, out};
    try {
        const auto& name = sub->get_name();
        if (name == "expand") r.expand_cmd();
        else if (name == "filter") r.filter_cmd();
        else if (name == "score") r.score_cmd();
        else if (name == "dist") r.dist_cmd();
        else if (name == "build") r.build_cmd();
        else if (name == "stats") r.stats_cmd();
        else if (name == "pipeline") r.pipeline_cmd();
        else if (name == "bootstrap") r.bootstrap_cmd();
    } catch (const Error& e) {
        int code = kData;
        switch (classify(e.code())) {
            case ErrorClass::Usage: code = kUsage; break;
            case ErrorClass::Backend: code = kBackend; break;
            case ErrorClass::Data: code = kData; break;
        }
        return fail(o, err, code, to_string(e.code()), e.detail());
    } catch (const json::exception& e) {
        return fail(o, err, kData, "SchemaError", e.what());
    } catch (const fs::filesystem_error& e) {
        return fail(o, err, kData, "IoError", e.what());
    }
    return kOk;
}

int run(const std::vector<std::string>& args) { return run(args, std::cout, std::cerr); }

}  // namespace instrexp::cli
