#include "instrexp/expansion.hpp"

#include <algorithm>
#include <cmath>
#include <future>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "instrexp/error.hpp"
#include "instrexp/ppg.hpp"
#include "instrexp/random.hpp"
#include "instrexp/text.hpp"

namespace instrexp::expand {

using nlohmann::json;

std::string_view to_string(Mode m) {
    switch (m) {
        case Mode::Single: return "single";
        case Mode::Iterative: return "iter";
        case Mode::MultiTemperature: return "mt";
    }
    return "single";
}

Mode mode_from_string(std::string_view s) {
    if (s == "single") return Mode::Single;
    if (s == "iter") return Mode::Iterative;
    if (s == "mt") return Mode::MultiTemperature;
    throw Error(ErrorCode::InvalidArgument, "unknown expansion mode '" + std::string(s) + "' (single|iter|mt)");
}

std::vector<double> default_ladder() {
    std::vector<double> ladder;
    for (int hundredths = 50; hundredths <= 100; hundredths += 5) ladder.push_back(hundredths / 100.0);
    return ladder;
}

std::vector<double> parse_ladder(std::string_view spec) {
    auto first = spec.find(':');
    auto second = first == std::string_view::npos ? first : spec.find(':', first + 1);
    if (second == std::string_view::npos) {
        throw Error(ErrorCode::InvalidArgument, "ladder must be 'start:end:step', got '" + std::string(spec) + "'");
    }
    double lo = 0, hi = 0, step = 0;
    try {
        lo = std::stod(std::string(spec.substr(0, first)));
        hi = std::stod(std::string(spec.substr(first + 1, second - first - 1)));
        step = std::stod(std::string(spec.substr(second + 1)));
    } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidArgument, "ladder values must be numbers: '" + std::string(spec) + "'");
    }
    if (!(step > 0) || hi < lo) throw Error(ErrorCode::InvalidArgument, "ladder needs step > 0 and end >= start");

    std::vector<double> ladder;
    for (int i = 0;; ++i) {
        // round to 1e-9 so 0.5 + 3*0.05 prints and compares as 0.65
        double t = std::round((lo + i * step) * 1e9) / 1e9;
        if (t > hi + 1e-9) break;
        ladder.push_back(t);
    }
    return ladder;
}

void ExpansionConfig::validate() const {
    if (iterations < 1) throw Error(ErrorCode::InvalidArgument, "iterations must be >= 1");
    if (jobs < 1) throw Error(ErrorCode::InvalidArgument, "jobs must be >= 1");
    if (target_count && *target_count == 0) throw Error(ErrorCode::InvalidArgument, "target count must be positive");
    if (mode == Mode::MultiTemperature) {
        if (temperature_ladder.empty()) throw Error(ErrorCode::InvalidArgument, "temperature ladder is empty");
        for (std::size_t i = 1; i < temperature_ladder.size(); ++i) {
            if (!(temperature_ladder[i] > temperature_ladder[i - 1])) {
                throw Error(ErrorCode::InvalidArgument, "temperature ladder must be strictly increasing");
            }
        }
    }
}

std::string temperature_tag(double t) {
    auto s = text::format_fixed(t, 4);
    while (s.size() > 1 && s.back() == '0' && s.size() - s.find('.') > 3) s.pop_back();
    return s;
}

std::string clean_generated_item(std::string_view item) {
    auto s = text::trim(item);
    constexpr std::string_view echo = "[TEXT]:";
    if (s.rfind(echo, 0) == 0) s = text::trim(std::string_view(s).substr(echo.size()));
    return s;
}

// ---------------------------------------------------------------------------

Journal::Journal(std::filesystem::path path) : path_(std::move(path)) {
    if (std::filesystem::exists(path_)) {
        std::ifstream in(path_);
        std::string line;
        while (std::getline(in, line)) {
            auto j = json::parse(line, nullptr, false);
            // a torn final line from a crash is skipped
            if (j.is_discarded() || !j.contains("key") || !j.contains("reply")) continue;
            replies_.insert_or_assign(j["key"].get<std::string>(), j["reply"].get<std::string>());
        }
        if (!replies_.empty()) spdlog::info("journal {}: resuming with {} replies", path_.string(), replies_.size());
    }
    if (path_.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path_.parent_path(), ec);
    }
    out_.open(path_, std::ios::app);
    if (!out_) throw Error(ErrorCode::IoError, "cannot open journal '" + path_.string() + "'");
}

std::optional<std::string> Journal::lookup(const std::string& request_key) const {
    std::lock_guard lock(mu_);
    auto it = replies_.find(request_key);
    if (it == replies_.end()) return std::nullopt;
    return it->second;
}

void Journal::record(const std::string& request_key, const std::string& reply) {
    std::lock_guard lock(mu_);
    replies_.insert_or_assign(request_key, reply);
    out_ << json{{"key", request_key}, {"reply", reply}}.dump() << '\n';
    out_.flush();
}

std::size_t Journal::size() const {
    std::lock_guard lock(mu_);
    return replies_.size();
}

void Journal::discard() {
    std::lock_guard lock(mu_);
    out_.close();
    std::error_code ec;
    std::filesystem::remove(path_, ec);
}

std::vector<GenerationCandidate> ExpansionResult::valid() const {
    std::vector<GenerationCandidate> out;
    for (const auto& c : candidates) {
        if (c.verdict == Verdict::Valid) out.push_back(c);
    }
    return out;
}

// ---------------------------------------------------------------------------

Expander::Expander(llm::ChatGateway& gateway, filter::FilterConfig filter_cfg, ExpansionConfig cfg, Journal* journal)
    : gateway_(gateway), filter_cfg_(filter_cfg), cfg_(std::move(cfg)), journal_(journal) {
    cfg_.validate();
    filter_cfg_.validate();
}

ExpansionResult Expander::run(std::span<const InstructionTemplate> raw_templates,
                              std::span<const llm::GuidingInstruction> guiding) {
    switch (cfg_.mode) {
        case Mode::Single: return expand_single(raw_templates, guiding);
        case Mode::Iterative: return expand_iterative(raw_templates, guiding);
        case Mode::MultiTemperature: return expand_multi_temperature(raw_templates, guiding);
    }
    return {};
}

ExpansionResult Expander::expand_single(std::span<const InstructionTemplate> raw_templates,
                                        std::span<const llm::GuidingInstruction> guiding) {
    const double t[] = {cfg_.temperature};
    return sweep(raw_templates, guiding, t, 1);
}

ExpansionResult Expander::expand_iterative(std::span<const InstructionTemplate> raw_templates,
                                           std::span<const llm::GuidingInstruction> guiding) {
    const double t[] = {cfg_.temperature};
    return sweep(raw_templates, guiding, t, cfg_.iterations);
}

ExpansionResult Expander::expand_multi_temperature(std::span<const InstructionTemplate> raw_templates,
                                                   std::span<const llm::GuidingInstruction> guiding) {
    return sweep(raw_templates, guiding, cfg_.temperature_ladder, 1);
}

ExpansionResult Expander::sweep(std::span<const InstructionTemplate> raw_templates,
                                std::span<const llm::GuidingInstruction> guiding,
                                std::span<const double> temperatures, int iterations) {
    if (guiding.empty()) throw Error(ErrorCode::InvalidArgument, "at least one guiding instruction is required");
    for (const auto& t : raw_templates) {
        if (t.origin != Origin::Raw) {
            throw Error(ErrorCode::InvalidArgument, "template '" + t.template_id + "' is not a raw template");
        }
    }

    ExpansionResult result;
    filter::FilterPipeline pipeline(filter_cfg_, raw_templates);

    std::vector<Input> inputs;
    for (const auto& t : raw_templates) inputs.push_back({t, t.template_id});
    std::sort(inputs.begin(), inputs.end(),
              [](const Input& a, const Input& b) { return a.tmpl.template_id < b.tmpl.template_id; });

    std::size_t valid_so_far = 0;
    for (int iteration = 0; iteration < iterations && !inputs.empty(); ++iteration) {
        auto produced = run_iteration(inputs, guiding, temperatures, iteration, pipeline, result, valid_so_far);
        if (result.stopped_early) break;

        // valid outputs become next round's inputs, re-masked from their own placeholders
        std::vector<Input> next;
        for (const auto& c : produced) {
            if (c.verdict != Verdict::Valid) continue;
            auto t = to_template(c);
            pipeline.add_parent(t);
            next.push_back({std::move(t), c.root_template_id});
        }
        inputs = std::move(next);
    }

    std::sort(result.candidates.begin(), result.candidates.end(),
              [](const auto& a, const auto& b) { return a.candidate_id < b.candidate_id; });
    result.report = pipeline.report();
    return result;
}

std::vector<GenerationCandidate> Expander::run_iteration(const std::vector<Input>& inputs,
                                                         std::span<const llm::GuidingInstruction> guiding,
                                                         std::span<const double> temperatures, int iteration,
                                                         filter::FilterPipeline& pipeline, ExpansionResult& result,
                                                         std::size_t& valid_so_far) {
    struct Request {
        std::string key;
        const Input* input;
        const llm::GuidingInstruction* guide;
        ppg::MaskedTemplate masked;
        llm::ChatRequest chat;
    };

    std::vector<const llm::GuidingInstruction*> guides;
    for (const auto& g : guiding) guides.push_back(&g);
    std::sort(guides.begin(), guides.end(), [](const auto* a, const auto* b) { return a->guiding_id < b->guiding_id; });

    std::string iter_tag = std::to_string(iteration);
    if (iter_tag.size() < 2) iter_tag.insert(0, 2 - iter_tag.size(), '0');

    std::vector<Request> requests;
    for (const auto& input : inputs) {
        auto masked = ppg::mask_placeholders(input.tmpl);
        for (const auto* g : guides) {
            for (double temperature : temperatures) {
                Request r;
                r.key = "i" + iter_tag + "." + input.tmpl.template_id + "." + g->guiding_id + ".t" +
                        temperature_tag(temperature);
                r.input = &input;
                r.guide = g;
                r.masked = masked;
                r.chat = llm::build_generation_prompt(*g, masked.masked_text, !masked.masks.empty());
                r.chat.temperature = temperature;
                r.chat.seed = splitmix64(cfg_.seed ^ text::fnv1a64(r.key));
                requests.push_back(std::move(r));
            }
        }
    }
    std::sort(requests.begin(), requests.end(), [](const Request& a, const Request& b) { return a.key < b.key; });
    result.generation_passes += temperatures.size();

    auto fetch = [this](const Request& r) -> std::string {
        if (journal_) {
            if (auto cached = journal_->lookup(r.key)) return *cached;
        }
        auto reply = gateway_.chat_generate(r.chat);
        if (journal_) journal_->record(r.key, reply);
        return reply;
    };

    std::vector<GenerationCandidate> produced;
    const auto window = static_cast<std::size_t>(cfg_.jobs);
    for (std::size_t begin = 0; begin < requests.size(); begin += window) {
        std::size_t end = std::min(requests.size(), begin + window);

        std::vector<std::future<std::string>> replies;
        for (std::size_t i = begin; i < end; ++i) {
            replies.push_back(std::async(std::launch::async, fetch, std::cref(requests[i])));
        }
        // collect every reply before rethrowing so finished work reaches the journal
        std::vector<std::string> texts(replies.size());
        std::exception_ptr failure;
        for (std::size_t i = 0; i < replies.size(); ++i) {
            try {
                texts[i] = replies[i].get();
            } catch (...) {
                if (!failure) failure = std::current_exception();
            }
        }
        if (failure) std::rethrow_exception(failure);

        // the target is checked after each request, in key order
        for (std::size_t i = begin; i < end; ++i) {
            const auto& r = requests[i];
            ++result.requests;
            auto items = llm::parse_enumerated_response(texts[i - begin]);
            for (std::size_t k = 0; k < items.size(); ++k) {
                std::string idx = std::to_string(k + 1);
                if (idx.size() < 2) idx.insert(0, 1, '0');

                GenerationCandidate c;
                c.candidate_id = r.key + "." + idx;
                c.task_id = r.input->tmpl.task_id;
                c.parent_template_id = r.input->tmpl.template_id;
                c.root_template_id = r.input->root_id;
                c.guiding_id = r.guide->guiding_id;
                c.temperature = r.chat.temperature;
                c.iteration = iteration;
                c.raw_output = clean_generated_item(items[k]);
                c.restored_text = ppg::restore_placeholders(c.raw_output, r.masked.masks);
                if (pipeline.apply(c) == Verdict::Valid) ++valid_so_far;
                produced.push_back(c);
                result.candidates.push_back(std::move(c));
            }
            if (cfg_.target_count && valid_so_far >= *cfg_.target_count) {
                spdlog::info("target of {} valid candidates reached", *cfg_.target_count);
                result.stopped_early = true;
                return produced;
            }
        }
    }
    return produced;
}

}  // namespace instrexp::expand
