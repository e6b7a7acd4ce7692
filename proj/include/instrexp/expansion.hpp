#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "instrexp/candidate.hpp"
#include "instrexp/llm.hpp"
#include "instrexp/postfilter.hpp"
#include "instrexp/template.hpp"

namespace instrexp::expand {

enum class Mode { Single, Iterative, MultiTemperature };

std::string_view to_string(Mode m);
Mode mode_from_string(std::string_view s);  // "single" | "iter" | "mt"

/// 0.50, 0.55, ..., 1.00
std::vector<double> default_ladder();

/// "a:b:step", inclusive of b.
std::vector<double> parse_ladder(std::string_view spec);

struct ExpansionConfig {
    Mode mode = Mode::Single;
    int iterations = 2;
    double temperature = 0.6;
    std::vector<double> temperature_ladder = default_ladder();
    std::optional<std::size_t> target_count;
    std::uint64_t seed = 0;
    /// Requests launched together; the gateway applies its own limit on top.
    int jobs = 4;

    void validate() const;
};

/// Append-only record of backend replies keyed by request, so an interrupted
/// run can resume without re-sending completed requests.
class Journal {
public:
    explicit Journal(std::filesystem::path path);

    std::optional<std::string> lookup(const std::string& request_key) const;
    void record(const std::string& request_key, const std::string& reply);
    std::size_t size() const;
    /// Delete the journal file (after a successful run).
    void discard();

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    mutable std::mutex mu_;
    std::unordered_map<std::string, std::string> replies_;
    std::ofstream out_;
};

struct ExpansionResult {
    std::vector<GenerationCandidate> candidates;  // sorted by candidate_id
    filter::FilterReport report;
    std::size_t generation_passes = 0;  // (iteration, temperature) sweeps started
    std::size_t requests = 0;           // generation requests issued or replayed
    bool stopped_early = false;

    std::vector<GenerationCandidate> valid() const;
};

class Expander {
public:
    Expander(llm::ChatGateway& gateway, filter::FilterConfig filter_cfg, ExpansionConfig cfg,
             Journal* journal = nullptr);

    /// Dispatch on cfg.mode.
    ExpansionResult run(std::span<const InstructionTemplate> raw_templates,
                        std::span<const llm::GuidingInstruction> guiding);

    /// One rewrite per (template, guiding) at cfg.temperature.
    ExpansionResult expand_single(std::span<const InstructionTemplate> raw_templates,
                                  std::span<const llm::GuidingInstruction> guiding);

    /// Valid outputs of round k are the inputs of round k+1.
    ExpansionResult expand_iterative(std::span<const InstructionTemplate> raw_templates,
                                     std::span<const llm::GuidingInstruction> guiding);

    /// One pass per ladder temperature over the raw templates, deduplicated across passes.
    ExpansionResult expand_multi_temperature(std::span<const InstructionTemplate> raw_templates,
                                             std::span<const llm::GuidingInstruction> guiding);

private:
    struct Input {
        InstructionTemplate tmpl;
        std::string root_id;
    };

    ExpansionResult sweep(std::span<const InstructionTemplate> raw_templates,
                          std::span<const llm::GuidingInstruction> guiding, std::span<const double> temperatures,
                          int iterations);

    /// Generate and filter one iteration. Returns the candidates produced in order.
    std::vector<GenerationCandidate> run_iteration(const std::vector<Input>& inputs,
                                                   std::span<const llm::GuidingInstruction> guiding,
                                                   std::span<const double> temperatures, int iteration,
                                                   filter::FilterPipeline& pipeline, ExpansionResult& result,
                                                   std::size_t& valid_so_far);

    llm::ChatGateway& gateway_;
    filter::FilterConfig filter_cfg_;
    ExpansionConfig cfg_;
    Journal* journal_;
};

/// "0.60", "0.55", "0.525"
std::string temperature_tag(double t);

/// Strip an echoed "[TEXT]:" prefix and surrounding whitespace from a reply item.
std::string clean_generated_item(std::string_view item);

}  // namespace instrexp::expand
