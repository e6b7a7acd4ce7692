#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "instrexp/candidate.hpp"
#include "instrexp/dataset.hpp"
#include "instrexp/llm.hpp"
#include "instrexp/postfilter.hpp"
#include "instrexp/ppg.hpp"
#include "instrexp/sampler.hpp"
#include "instrexp/stats.hpp"
#include "instrexp/template.hpp"

namespace instrexp::io {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

// Record <-> JSON. from_json functions throw Error(SchemaError) with a
// message suitable for prefixing with "path:line: ".

ojson to_json(const InstructionTemplate& t);
InstructionTemplate template_from_json(const json& j);

ojson to_json(const InstanceRecord& x);
InstanceRecord instance_from_json(const json& j);

ojson to_json(const GenerationCandidate& c);
GenerationCandidate candidate_from_json(const json& j);

ojson to_json(const llm::GuidingInstruction& g);
/// guiding_id may be omitted; the caller assigns positional ids.
llm::GuidingInstruction guiding_from_json(const json& j);

ojson to_json(const sampler::TaskPool& p);
sampler::TaskPool pool_from_json(const json& j);

ojson to_json(const dataset::DatasetRecord& r);
dataset::DatasetRecord record_from_json(const json& j);

ojson to_json(const ppg::MaskMap& m);
ojson to_json(const filter::FilterReport& r);
ojson to_json(const dataset::BuildReport& r);
ojson to_json(const stats::CorpusStats& s);

// Files

std::string read_file(const std::filesystem::path& path);
/// Write via a temporary sibling and rename, so readers never see a partial file.
void write_file(const std::filesystem::path& path, const std::string& contents);

/// Parse one JSON object per non-blank line. Errors name the 1-based line.
std::vector<json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<ojson>& rows);

std::vector<InstructionTemplate> read_templates(const std::filesystem::path& path);
void write_templates(const std::filesystem::path& path, const std::vector<InstructionTemplate>& ts);

std::vector<InstanceRecord> read_instances(const std::filesystem::path& path);

std::vector<GenerationCandidate> read_candidates(const std::filesystem::path& path);
void write_candidates(const std::filesystem::path& path, const std::vector<GenerationCandidate>& cs);

std::vector<llm::GuidingInstruction> read_guiding(const std::filesystem::path& path);
void write_guiding(const std::filesystem::path& path, const std::vector<llm::GuidingInstruction>& gs);

std::vector<dataset::DatasetRecord> read_records(const std::filesystem::path& path);
void write_records(const std::filesystem::path& path, const std::vector<dataset::DatasetRecord>& rs);

/// {"pools": [...]}
std::vector<sampler::TaskPool> read_pools(const std::filesystem::path& path);
void write_pools(const std::filesystem::path& path, const std::vector<sampler::TaskPool>& pools,
                 const ojson& extra = ojson::object());

}  // namespace instrexp::io
