#include "instrexp/io.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "instrexp/error.hpp"
#include "instrexp/text.hpp"

namespace instrexp::io {

namespace {

[[noreturn]] void schema(const std::string& msg) { throw Error(ErrorCode::SchemaError, msg); }

const json& field(const json& j, const char* key) {
    if (!j.is_object()) schema("expected a JSON object");
    auto it = j.find(key);
    if (it == j.end()) schema(std::string("missing field '") + key + "'");
    return *it;
}

std::string string_field(const json& j, const char* key) {
    const auto& v = field(j, key);
    if (!v.is_string()) schema(std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
}

std::string nonempty_string_field(const json& j, const char* key) {
    auto s = string_field(j, key);
    if (s.empty()) schema(std::string("field '") + key + "' must be nonempty");
    return s;
}

std::optional<std::string> optional_string(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) schema(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

double number_field(const json& j, const char* key) {
    const auto& v = field(j, key);
    if (!v.is_number()) schema(std::string("field '") + key + "' must be a number");
    return v.get<double>();
}

template <typename T>
std::vector<T> parse_lines(const std::filesystem::path& path, T (*convert)(const json&)) {
    auto rows = read_jsonl(path);
    std::vector<T> out;
    out.reserve(rows.size());
    // read_jsonl drops blank lines, so recover line numbers for error messages
    std::ifstream in(path);
    std::string line;
    std::size_t lineno = 0;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        try {
            out.push_back(convert(rows.at(row++)));
        } catch (const Error& e) {
            throw Error(ErrorCode::SchemaError, path.string() + ":" + std::to_string(lineno) + ": " + e.detail());
        }
    }
    return out;
}

template <typename T>
void write_rows(const std::filesystem::path& path, const std::vector<T>& items) {
    std::vector<ojson> rows;
    rows.reserve(items.size());
    for (const auto& it : items) rows.push_back(to_json(it));
    write_jsonl(path, rows);
}

}  // namespace

// ---------------------------------------------------------------------------

ojson to_json(const InstructionTemplate& t) {
    ojson j;
    j["template_id"] = t.template_id;
    j["task_id"] = t.task_id;
    j["text"] = render_template(t);
    j["origin"] = t.origin == Origin::Raw ? "raw" : "generated";
    if (t.lineage) {
        j["lineage"] = ojson{{"parent_template_id", t.lineage->parent_template_id},
                             {"root_template_id", t.lineage->root_template_id},
                             {"guiding_id", t.lineage->guiding_id},
                             {"temperature", t.lineage->temperature},
                             {"iteration", t.lineage->iteration}};
    }
    if (t.annotation) {
        ojson a = ojson::object();
        if (t.annotation->direct_question) a["direct_question"] = *t.annotation->direct_question;
        if (t.annotation->option_inclusive) a["option_inclusive"] = *t.annotation->option_inclusive;
        j["attributes"] = a;
    }
    return j;
}

InstructionTemplate template_from_json(const json& j) {
    auto text = string_field(j, "text");
    InstructionTemplate t;
    try {
        t = parse_template(text);
    } catch (const Error& e) {
        schema("template text: " + std::string(e.what()));
    }
    t.template_id = nonempty_string_field(j, "template_id");
    t.task_id = nonempty_string_field(j, "task_id");

    auto origin = j.value("origin", std::string("raw"));
    if (origin == "raw") {
        t.origin = Origin::Raw;
    } else if (origin == "generated") {
        t.origin = Origin::Generated;
    } else {
        schema("origin must be 'raw' or 'generated'");
    }

    if (auto it = j.find("lineage"); it != j.end() && !it->is_null()) {
        if (!it->is_object()) schema("lineage must be an object");
        Lineage l;
        l.parent_template_id = it->value("parent_template_id", std::string());
        l.root_template_id = it->value("root_template_id", l.parent_template_id);
        l.guiding_id = it->value("guiding_id", std::string());
        l.temperature = it->value("temperature", 0.0);
        l.iteration = it->value("iteration", 0);
        if (l.parent_template_id.empty()) schema("lineage.parent_template_id must be nonempty");
        t.lineage = l;
    }
    if (t.origin == Origin::Raw && t.lineage) schema("raw templates must not carry lineage");
    if (t.origin == Origin::Generated && !t.lineage) schema("generated templates need lineage");

    if (auto it = j.find("attributes"); it != j.end() && it->is_object()) {
        TaskAnnotation a;
        if (it->contains("direct_question")) a.direct_question = (*it)["direct_question"].get<bool>();
        if (it->contains("option_inclusive")) a.option_inclusive = (*it)["option_inclusive"].get<bool>();
        t.annotation = a;
    }
    return t;
}

ojson to_json(const InstanceRecord& x) {
    ojson fields = ojson::object();
    for (const auto& [k, v] : x.fields) {
        if (const auto* s = std::get_if<std::string>(&v)) {
            fields[k] = *s;
        } else {
            fields[k] = std::get<std::vector<std::string>>(v);
        }
    }
    ojson j;
    j["instance_id"] = x.instance_id;
    j["task_id"] = x.task_id;
    j["fields"] = fields;
    j["target"] = x.target;
    if (x.media_ref) j["media_ref"] = *x.media_ref;
    return j;
}

InstanceRecord instance_from_json(const json& j) {
    InstanceRecord x;
    x.instance_id = nonempty_string_field(j, "instance_id");
    x.task_id = nonempty_string_field(j, "task_id");
    x.target = nonempty_string_field(j, "target");
    x.media_ref = optional_string(j, "media_ref");
    const auto& fields = field(j, "fields");
    if (!fields.is_object()) schema("fields must be an object");
    for (const auto& [k, v] : fields.items()) {
        if (!text::is_identifier(k)) schema("field name '" + k + "' is not an identifier");
        if (v.is_string()) {
            x.fields.emplace(k, v.get<std::string>());
        } else if (v.is_array() && std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_string(); })) {
            x.fields.emplace(k, v.get<std::vector<std::string>>());
        } else {
            schema("field '" + k + "' must be a string or a list of strings");
        }
    }
    return x;
}

ojson to_json(const GenerationCandidate& c) {
    ojson j;
    j["candidate_id"] = c.candidate_id;
    j["task_id"] = c.task_id;
    j["parent_template_id"] = c.parent_template_id;
    j["root_template_id"] = c.root_template_id;
    j["guiding_id"] = c.guiding_id;
    j["temperature"] = c.temperature;
    j["iteration"] = c.iteration;
    j["raw_output"] = c.raw_output;
    j["restored_text"] = c.restored_text;
    j["verdict"] = std::string(to_string(c.verdict));
    return j;
}

GenerationCandidate candidate_from_json(const json& j) {
    GenerationCandidate c;
    c.candidate_id = nonempty_string_field(j, "candidate_id");
    c.task_id = nonempty_string_field(j, "task_id");
    c.parent_template_id = nonempty_string_field(j, "parent_template_id");
    c.root_template_id = j.value("root_template_id", c.parent_template_id);
    c.guiding_id = string_field(j, "guiding_id");
    c.temperature = number_field(j, "temperature");
    c.iteration = j.value("iteration", 0);
    c.raw_output = j.value("raw_output", std::string());
    c.restored_text = string_field(j, "restored_text");
    c.verdict = verdict_from_string(j.value("verdict", std::string("pending")));
    return c;
}

ojson to_json(const llm::GuidingInstruction& g) {
    return ojson{{"guiding_id", g.guiding_id},
                 {"text", g.text},
                 {"source", g.source == llm::GuidingSource::Bootstrapped ? "bootstrapped" : "hand_written"}};
}

llm::GuidingInstruction guiding_from_json(const json& j) {
    llm::GuidingInstruction g;
    g.guiding_id = optional_string(j, "guiding_id").value_or("");
    g.text = text::normalize(nonempty_string_field(j, "text"));
    if (g.text.empty()) schema("guiding text is blank");
    auto src = j.value("source", std::string("hand_written"));
    if (src == "bootstrapped") {
        g.source = llm::GuidingSource::Bootstrapped;
    } else if (src == "hand_written") {
        g.source = llm::GuidingSource::HandWritten;
    } else {
        schema("source must be 'hand_written' or 'bootstrapped'");
    }
    return g;
}

ojson to_json(const sampler::TaskPool& p) {
    ojson j;
    j["task_id"] = p.task_id;
    j["epsilon"] = p.epsilon ? ojson(*p.epsilon) : ojson(nullptr);
    j["originals"] = p.originals;
    ojson gen = ojson::array();
    for (const auto& g : p.generated) {
        gen.push_back(ojson{{"template_id", g.template_id}, {"origin_id", g.origin_id}, {"score", g.score}});
    }
    j["generated"] = gen;
    if (p.built()) {
        ojson probs = ojson::array();
        for (std::size_t i = 0; i < p.size(); ++i) {
            probs.push_back(ojson{{"template_id", p.id_at(i)}, {"probability", p.probabilities[i]}});
        }
        j["probabilities"] = probs;
    }
    return j;
}

sampler::TaskPool pool_from_json(const json& j) {
    sampler::TaskPool p;
    p.task_id = nonempty_string_field(j, "task_id");
    if (auto it = j.find("epsilon"); it != j.end() && !it->is_null()) p.epsilon = it->get<double>();
    for (const auto& o : field(j, "originals")) p.originals.push_back(o.get<std::string>());
    for (const auto& g : field(j, "generated")) {
        p.generated.push_back({string_field(g, "template_id"), string_field(g, "origin_id"), number_field(g, "score")});
    }
    if (auto it = j.find("probabilities"); it != j.end() && !it->is_null()) {
        const auto& probs = *it;
        if (probs.size() != p.size()) schema("probabilities do not cover the pool of task '" + p.task_id + "'");
        for (std::size_t i = 0; i < probs.size(); ++i) {
            if (string_field(probs[i], "template_id") != p.id_at(i)) {
                schema("probabilities out of order for task '" + p.task_id + "'");
            }
            p.probabilities.push_back(number_field(probs[i], "probability"));
        }
    }
    return p;
}

ojson to_json(const dataset::DatasetRecord& r) {
    ojson j;
    j["task_id"] = r.task_id;
    j["instance_id"] = r.instance_id;
    j["template_id"] = r.template_id;
    j["instruction_text"] = r.instruction_text;
    j["target"] = r.target;
    if (r.media_ref) j["media_ref"] = *r.media_ref;
    return j;
}

dataset::DatasetRecord record_from_json(const json& j) {
    dataset::DatasetRecord r;
    r.task_id = nonempty_string_field(j, "task_id");
    r.instance_id = nonempty_string_field(j, "instance_id");
    r.template_id = nonempty_string_field(j, "template_id");
    r.instruction_text = string_field(j, "instruction_text");
    r.target = string_field(j, "target");
    r.media_ref = optional_string(j, "media_ref");
    return r;
}

ojson to_json(const ppg::MaskMap& m) {
    ojson arr = ojson::array();
    for (const auto& [mask, expr] : m.entries) arr.push_back(ojson{{"mask", mask}, {"placeholder", expr.raw_text}});
    return arr;
}

namespace {

ojson counts_json(const filter::StageCounts& c) {
    return ojson{{"valid", c.valid}, {"dup", c.dup}, {"placeholder", c.placeholder}, {"length", c.length},
                 {"parse", c.parse}};
}

}  // namespace

ojson to_json(const filter::FilterReport& r) {
    ojson tasks = ojson::object();
    for (const auto& [task, c] : r.per_task) tasks[task] = counts_json(c);
    return ojson{{"tasks", tasks}, {"total", counts_json(r.total())}};
}

ojson to_json(const dataset::BuildReport& r) {
    ojson tasks = ojson::object();
    for (const auto& [task, t] : r.per_task) {
        ojson usage = ojson::object();
        for (const auto& [tid, n] : t.template_usage) usage[tid] = n;
        tasks[task] = ojson{{"instances_available", t.instances_available},
                            {"instances_selected", t.instances_selected},
                            {"records", t.records},
                            {"redraws", t.redraws},
                            {"skipped", t.skipped},
                            {"template_usage", usage},
                            {"warnings", t.warnings}};
    }
    return ojson{{"total_records", r.total_records}, {"tasks", tasks}};
}

ojson to_json(const stats::CorpusStats& s) {
    ojson hist = ojson::array();
    for (const auto& [len, n] : s.length_histogram) hist.push_back(ojson{{"length", len}, {"count", n}});

    std::vector<std::pair<std::pair<std::string, std::string>, std::size_t>> prefixes(s.prefix2_distribution.begin(),
                                                                                       s.prefix2_distribution.end());
    std::stable_sort(prefixes.begin(), prefixes.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    ojson pre = ojson::array();
    for (const auto& [key, n] : prefixes) pre.push_back(ojson{{"first", key.first}, {"second", key.second}, {"count", n}});

    return ojson{{"n_instructions", s.n_instructions},
                 {"avg_word_length", s.avg_word_length},
                 {"empty", s.empty},
                 {"length_histogram", hist},
                 {"prefix2_distribution", pre}};
}

// ---------------------------------------------------------------------------

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
        out << contents;
        if (!out) throw Error(ErrorCode::IoError, "short write to '" + path.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot move output into place at '" + path.string() + "': " + ec.message());
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot read '" + path.string() + "'");
    std::vector<json> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        auto j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw Error(ErrorCode::SchemaError, path.string() + ":" + std::to_string(lineno) + ": not a JSON object");
        }
        rows.push_back(std::move(j));
    }
    return rows;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<ojson>& rows) {
    std::string out;
    for (const auto& r : rows) {
        out += r.dump();
        out += '\n';
    }
    write_file(path, out);
}

std::vector<InstructionTemplate> read_templates(const std::filesystem::path& path) {
    auto ts = parse_lines<InstructionTemplate>(path, &template_from_json);
    std::set<std::string> ids;
    for (const auto& t : ts) {
        if (!ids.insert(t.template_id).second) {
            throw Error(ErrorCode::SchemaError, path.string() + ": duplicate template_id '" + t.template_id + "'");
        }
    }
    return ts;
}

void write_templates(const std::filesystem::path& path, const std::vector<InstructionTemplate>& ts) {
    write_rows(path, ts);
}

std::vector<InstanceRecord> read_instances(const std::filesystem::path& path) {
    return parse_lines<InstanceRecord>(path, &instance_from_json);
}

std::vector<GenerationCandidate> read_candidates(const std::filesystem::path& path) {
    return parse_lines<GenerationCandidate>(path, &candidate_from_json);
}

void write_candidates(const std::filesystem::path& path, const std::vector<GenerationCandidate>& cs) {
    write_rows(path, cs);
}

std::vector<llm::GuidingInstruction> read_guiding(const std::filesystem::path& path) {
    auto gs = parse_lines<llm::GuidingInstruction>(path, &guiding_from_json);
    for (std::size_t i = 0; i < gs.size(); ++i) {
        if (gs[i].guiding_id.empty()) gs[i].guiding_id = llm::guiding_id(i);
    }
    return gs;
}

void write_guiding(const std::filesystem::path& path, const std::vector<llm::GuidingInstruction>& gs) {
    write_rows(path, gs);
}

std::vector<dataset::DatasetRecord> read_records(const std::filesystem::path& path) {
    return parse_lines<dataset::DatasetRecord>(path, &record_from_json);
}

void write_records(const std::filesystem::path& path, const std::vector<dataset::DatasetRecord>& rs) {
    write_rows(path, rs);
}

std::vector<sampler::TaskPool> read_pools(const std::filesystem::path& path) {
    auto doc = json::parse(read_file(path), nullptr, false);
    if (doc.is_discarded()) throw Error(ErrorCode::SchemaError, path.string() + ": not valid JSON");
    std::vector<sampler::TaskPool> pools;
    try {
        for (const auto& p : field(doc, "pools")) pools.push_back(pool_from_json(p));
    } catch (const Error& e) {
        throw Error(ErrorCode::SchemaError, path.string() + ": " + e.detail());
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaError, path.string() + ": " + e.what());
    }
    return pools;
}

void write_pools(const std::filesystem::path& path, const std::vector<sampler::TaskPool>& pools, const ojson& extra) {
    ojson doc = extra.is_object() ? extra : ojson::object();
    ojson arr = ojson::array();
    for (const auto& p : pools) arr.push_back(to_json(p));
    doc["pools"] = arr;
    write_file(path, doc.dump(2) + "\n");
}

}  // namespace instrexp::io
