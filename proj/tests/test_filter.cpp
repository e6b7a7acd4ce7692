#include <doctest.h>

#include "instrexp/error.hpp"
#include "instrexp/postfilter.hpp"
#include "instrexp/template.hpp"

using namespace instrexp;
using namespace instrexp::filter;

namespace {

const char* kHallucination =
    "The photograph depicts a majestic landscape with a serene lake in the foreground, surrounded by towering trees "
    "with vibrant foliage. The water's edge is adorned with smooth rocks and lush vegetation, creating a picturesque "
    "setting. In the distance, the sky is painted with hues of blue and white, adding a touch of elegance to the scene. "
    "The overall ambiance is one of tranquility and natural beauty, inviting the viewer to pause and appreciate the "
    "splendor of the outdoors.";

GenerationCandidate cand(std::string id, std::string parent, std::string text, std::string task = "t") {
    GenerationCandidate c;
    c.candidate_id = std::move(id);
    c.task_id = std::move(task);
    c.parent_template_id = parent;
    c.root_template_id = parent;
    c.guiding_id = "g01";
    c.temperature = 0.6;
    c.restored_text = std::move(text);
    return c;
}

std::vector<InstructionTemplate> raw_set() {
    return {parse_template("Generate some text to describe the image.", "cap", "t"),
            parse_template("Is the object {text} in {regions}? {options}", "orm", "t"),
            parse_template("What is the content of {regions}?", "gc", "u")};
}

}  // namespace

TEST_CASE("the appendix hallucination is 78 words against 7") {
    auto original = parse_template("Generate some text to describe the image.");
    auto candidate = parse_template(kHallucination);
    CHECK(word_count(original) == 7);
    CHECK(word_count(candidate) == 78);
    FilterConfig cfg;
    CHECK(length_filter(candidate, original, cfg) == Verdict::RejectedLength);
    cfg.length_filter_enabled = false;
    CHECK(length_filter(candidate, original, cfg) == Verdict::Valid);
}

TEST_CASE("length thresholds") {
    FilterConfig cfg;
    // short originals get a slack of 10 words
    CHECK_FALSE(exceeds_length(17, 7, cfg));
    CHECK(exceeds_length(22, 7, cfg));
    CHECK_FALSE(exceeds_length(21, 7, cfg));
    // longer originals use the ratio
    CHECK_FALSE(exceeds_length(60, 20, cfg));
    CHECK(exceeds_length(61, 20, cfg));
    // absolute cap
    CHECK(exceeds_length(61, 40, cfg));
    CHECK_FALSE(exceeds_length(60, 40, cfg));
    cfg.length_ratio_cap = 1.5;
    cfg.length_slack_words = 0;
    CHECK(exceeds_length(16, 10, cfg));
}

TEST_CASE("filter config validation") {
    FilterConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.length_ratio_cap = 0.5;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.absolute_word_cap = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("placeholder filter follows the match mode") {
    auto original = parse_template("Is the object {text} in {regions}? {options}");
    FilterConfig unordered;
    FilterConfig ordered;
    ordered.match_mode = ppg::MatchMode::Ordered;
    auto reordered = parse_template("In {regions}, is the object {text}? {options}");
    CHECK(placeholder_filter(reordered, original, unordered) == Verdict::Valid);
    CHECK(placeholder_filter(reordered, original, ordered) == Verdict::RejectedPlaceholder);
    auto dropped = parse_template("Is the object {text} there? {options}");
    CHECK(placeholder_filter(dropped, original, unordered) == Verdict::RejectedPlaceholder);

    auto plain = parse_template("Describe the image.");
    CHECK(placeholder_filter(parse_template("Describe {x}."), plain, ordered) == Verdict::Valid);
}

TEST_CASE("dedup normalizes whitespace and keeps the first occurrence") {
    std::vector<GenerationCandidate> cs = {cand("c2", "cap", "Describe   the image."),
                                           cand("c1", "cap", " Describe the image. "),
                                           cand("c3", "cap", "Generate some text to describe the image."),
                                           cand("c4", "gc", "Describe the image.", "u")};
    auto raw = raw_set();
    auto v = dedup(cs, raw, FilterConfig{});
    REQUIRE(v.size() == 4);
    CHECK(v[1] == Verdict::Pending);  // c1 sorts first and survives
    CHECK(v[0] == Verdict::RejectedDuplicate);
    CHECK(v[2] == Verdict::RejectedDuplicate);  // equals a raw template
    CHECK(v[3] == Verdict::Pending);            // other task

    FilterConfig global;
    global.dedup_scope = DedupScope::Global;
    auto g = dedup(cs, raw, global);
    CHECK(g[3] == Verdict::RejectedDuplicate);
}

TEST_CASE("pipeline stages run in order and the first failure wins") {
    auto raw = raw_set();
    std::vector<GenerationCandidate> cs = {
        cand("a1", "orm", "Is {text in {regions}? {options}"),              // parse
        cand("a2", "orm", "Is the object {text} in {regions}? {options}"),  // duplicate of raw
        cand("a3", "orm", "Is the object {text} there?"),                   // placeholder
        cand("a4", "cap", kHallucination),                                  // length
        cand("a5", "orm", "In {regions}, is the object {text}? {options}"),
        cand("a6", "orm", "In   {regions}, is the object {text}? {options}"),  // duplicate of a5
        cand("a7", "orm", "Is the object {text} there? Yes or no. {options}"),  // placeholder beats dup-free
    };
    auto result = run_pipeline(cs, raw, FilterConfig{});
    std::vector<Verdict> got;
    for (const auto& c : result.candidates) got.push_back(c.verdict);
    CHECK(got == std::vector<Verdict>{Verdict::RejectedParse, Verdict::RejectedDuplicate, Verdict::RejectedPlaceholder,
                                      Verdict::RejectedLength, Verdict::Valid, Verdict::RejectedDuplicate,
                                      Verdict::RejectedPlaceholder});
    REQUIRE(result.valid.size() == 1);
    CHECK(result.valid[0].candidate_id == "a5");
    auto counts = result.report.per_task.at("t");
    CHECK(counts.parse == 1);
    CHECK(counts.dup == 2);
    CHECK(counts.placeholder == 2);
    CHECK(counts.length == 1);
    CHECK(counts.valid == 1);
    CHECK(result.report.total().total() == 7);
}

TEST_CASE("rejected candidates do not block later identical ones") {
    auto raw = raw_set();
    std::vector<GenerationCandidate> cs = {cand("b1", "orm", "Is the object {text} there?"),
                                           cand("b2", "cap", "Is the object {text} there?")};
    auto result = run_pipeline(cs, raw, FilterConfig{});
    CHECK(result.candidates[0].verdict == Verdict::RejectedPlaceholder);
    CHECK(result.candidates[1].verdict == Verdict::Valid);
}

TEST_CASE("generated parents are compared against their own parent") {
    auto raw = raw_set();
    auto child = cand("i00.x", "cap", "Write a short text describing the picture in front of you.");
    // 25 words: too long next to the 7-word raw template, fine next to its 11-word parent
    auto grandchild = cand("i01.y", "i00.x",
                           "Write a short text describing the picture in front of you, covering the main objects, "
                           "their colours and the overall mood of the whole scene.");
    grandchild.root_template_id = "cap";
    grandchild.iteration = 1;
    CHECK(word_count(parse_template(grandchild.restored_text)) == 25);
    auto result = run_pipeline({child, grandchild}, raw, FilterConfig{});
    CHECK(result.valid.size() == 2);
}

TEST_CASE("unknown parents are a schema error") {
    auto raw = raw_set();
    try {
        run_pipeline({cand("z", "missing", "Describe it.")}, raw, FilterConfig{});
        FAIL("expected SchemaError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::SchemaError);
    }
}

TEST_CASE("verdict strings round-trip") {
    for (auto v : {Verdict::Pending, Verdict::Valid, Verdict::RejectedDuplicate, Verdict::RejectedPlaceholder,
                   Verdict::RejectedLength, Verdict::RejectedParse}) {
        CHECK(verdict_from_string(to_string(v)) == v);
    }
    CHECK(to_string(Verdict::RejectedDuplicate) == "rejected_duplicate");
    CHECK_THROWS_AS(verdict_from_string("maybe"), Error);
}
