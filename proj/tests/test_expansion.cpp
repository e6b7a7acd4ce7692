#include <doctest.h>

#include <atomic>

#include "instrexp/error.hpp"
#include "instrexp/expansion.hpp"
#include "instrexp/io.hpp"
#include "support.hpp"

using namespace instrexp;
using namespace instrexp::expand;

namespace {

struct Golden {
    std::vector<InstructionTemplate> raw = io::read_templates(testing::data_dir() / "golden" / "raw_templates.jsonl");
    std::vector<llm::GuidingInstruction> guiding = io::read_guiding(testing::data_dir() / "golden" / "guiding.jsonl");

    std::shared_ptr<llm::MockChatBackend> backend() const {
        return llm::MockChatBackend::from_file((testing::data_dir() / "golden" / "fixtures.jsonl").string());
    }
};

/// Delegates to another backend and fails once a call budget is spent.
class FlakyBackend : public llm::ChatBackend {
public:
    FlakyBackend(std::shared_ptr<llm::ChatBackend> inner, int budget) : inner_(std::move(inner)), budget_(budget) {}
    std::string complete(const llm::ChatRequest& req) override {
        if (budget_-- <= 0) throw Error(ErrorCode::BadResponse, "connection dropped");
        return inner_->complete(req);
    }
    std::string name() const override { return "flaky"; }

private:
    std::shared_ptr<llm::ChatBackend> inner_;
    std::atomic<int> budget_;
};

ExpansionResult run_mode(const Golden& g, ExpansionConfig cfg, filter::FilterConfig fcfg = {},
                         std::shared_ptr<llm::ChatBackend> backend = nullptr, Journal* journal = nullptr) {
    llm::ChatGateway gw(backend ? backend : g.backend());
    Expander ex(gw, fcfg, cfg, journal);
    return ex.run(g.raw, g.guiding);
}

const GenerationCandidate* find(const ExpansionResult& r, const std::string& id) {
    for (const auto& c : r.candidates) {
        if (c.candidate_id == id) return &c;
    }
    return nullptr;
}

}  // namespace

TEST_CASE("temperature tags and ladders") {
    CHECK(temperature_tag(0.6) == "0.60");
    CHECK(temperature_tag(1.0) == "1.00");
    CHECK(temperature_tag(0.525) == "0.525");
    auto ladder = default_ladder();
    REQUIRE(ladder.size() == 11);
    CHECK(ladder.front() == doctest::Approx(0.5));
    CHECK(ladder.back() == doctest::Approx(1.0));
    CHECK(parse_ladder("0.50:1.00:0.05") == ladder);
    CHECK(parse_ladder("0.7:0.7:0.1") == std::vector<double>{0.7});
    CHECK_THROWS_AS(parse_ladder("0.5:1.0"), Error);
    CHECK_THROWS_AS(parse_ladder("0.5:1.0:0"), Error);
    CHECK_THROWS_AS(parse_ladder("1.0:0.5:0.1"), Error);
    CHECK(mode_from_string("mt") == Mode::MultiTemperature);
    CHECK(to_string(Mode::Iterative) == "iter");
    CHECK_THROWS_AS(mode_from_string("fast"), Error);
}

TEST_CASE("reply items lose an echoed [TEXT] marker") {
    CHECK(clean_generated_item("[TEXT]: Describe it. ") == "Describe it.");
    CHECK(clean_generated_item("Describe it.") == "Describe it.");
}

TEST_CASE("config validation") {
    ExpansionConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.iterations = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.jobs = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.temperature_ladder.clear();
    cfg.mode = Mode::MultiTemperature;
    CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("single expansion over the golden fixtures") {
    Golden g;
    auto r = run_mode(g, ExpansionConfig{});
    CHECK(r.requests == g.raw.size() * g.guiding.size());
    CHECK(r.generation_passes == 1);
    CHECK_FALSE(r.stopped_early);

    auto* hallucination = find(r, "i00.image_caption.t2.g01.t0.60.01");
    REQUIRE(hallucination);
    CHECK(hallucination->verdict == Verdict::RejectedLength);

    auto* reordered = find(r, "i00.object_region_match.t1.g02.t0.60.01");
    REQUIRE(reordered);
    CHECK(reordered->raw_output == "In {B}, is the object {A}? {C}");
    CHECK(reordered->restored_text == "In {regions}, is the object {text}? {options}");
    CHECK(reordered->verdict == Verdict::Valid);

    auto* dup = find(r, "i00.image_caption.t2.g03.t0.60.01");
    REQUIRE(dup);
    CHECK(dup->verdict == Verdict::RejectedDuplicate);

    auto* same_reply_dup = find(r, "i00.visual_attribute.t1.g03.t0.60.02");
    REQUIRE(same_reply_dup);
    CHECK(same_reply_dup->verdict == Verdict::RejectedDuplicate);

    auto* broken = find(r, "i00.visual_attribute.t2.g03.t0.60.01");
    REQUIRE(broken);
    CHECK(broken->verdict == Verdict::RejectedParse);

    for (const auto& c : r.candidates) {
        CHECK(c.iteration == 0);
        CHECK(c.parent_template_id == c.root_template_id);
    }
}

TEST_CASE("with ordered matching the reordered rewrite is rejected") {
    Golden g;
    filter::FilterConfig ordered;
    ordered.match_mode = ppg::MatchMode::Ordered;
    auto r = run_mode(g, ExpansionConfig{}, ordered);
    auto* reordered = find(r, "i00.object_region_match.t1.g02.t0.60.01");
    REQUIRE(reordered);
    CHECK(reordered->verdict == Verdict::RejectedPlaceholder);
}

TEST_CASE("inline filtering agrees with re-filtering the output") {
    Golden g;
    ExpansionConfig cfg;
    cfg.mode = Mode::Iterative;
    auto r = run_mode(g, cfg);
    auto again = filter::run_pipeline(r.candidates, g.raw, filter::FilterConfig{});
    REQUIRE(again.candidates.size() == r.candidates.size());
    for (std::size_t i = 0; i < r.candidates.size(); ++i) {
        CHECK(again.candidates[i].candidate_id == r.candidates[i].candidate_id);
        CHECK(again.candidates[i].verdict == r.candidates[i].verdict);
    }
}

TEST_CASE("iterative expansion feeds valid outputs back") {
    Golden g;
    ExpansionConfig cfg;
    cfg.mode = Mode::Iterative;
    cfg.iterations = 2;
    auto r = run_mode(g, cfg);
    CHECK(r.generation_passes == 2);
    bool saw_second_round = false;
    for (const auto& c : r.candidates) {
        if (c.iteration != 1) continue;
        saw_second_round = true;
        CHECK(c.candidate_id.rfind("i01.", 0) == 0);
        CHECK(c.parent_template_id.rfind("i00.", 0) == 0);
        CHECK(c.root_template_id.find('.') != std::string::npos);
        CHECK(c.root_template_id.rfind("i0", 0) != 0);
        // parents of round two are valid round-one outputs
        auto* parent = find(r, c.parent_template_id);
        REQUIRE(parent);
        CHECK(parent->verdict == Verdict::Valid);
    }
    CHECK(saw_second_round);
}

TEST_CASE("one iteration equals single mode") {
    Golden g;
    ExpansionConfig single;
    ExpansionConfig iter;
    iter.mode = Mode::Iterative;
    iter.iterations = 1;
    CHECK(run_mode(g, single).candidates == run_mode(g, iter).candidates);
}

TEST_CASE("candidate counts grow with iterations") {
    Golden g;
    std::size_t prev_all = 0;
    std::size_t prev_valid = 0;
    for (int n = 1; n <= 3; ++n) {
        ExpansionConfig cfg;
        cfg.mode = Mode::Iterative;
        cfg.iterations = n;
        auto r = run_mode(g, cfg);
        CHECK(r.candidates.size() >= prev_all);
        CHECK(r.valid().size() >= prev_valid);
        prev_all = r.candidates.size();
        prev_valid = r.valid().size();
    }
}

TEST_CASE("multi-temperature expansion sweeps the ladder") {
    Golden g;
    ExpansionConfig cfg;
    cfg.mode = Mode::MultiTemperature;
    auto r = run_mode(g, cfg);
    CHECK(r.generation_passes == 11);
    CHECK(r.requests == 11 * g.raw.size() * g.guiding.size());
    auto* hot = find(r, "i00.grounded_caption.t1.g01.t0.90.01");
    REQUIRE(hot);
    CHECK(hot->restored_text == "Describe what {regions} holds.");
    CHECK(hot->temperature == doctest::Approx(0.9));
    CHECK(hot->verdict == Verdict::Valid);
    auto* warm = find(r, "i00.grounded_caption.t1.g01.t0.85.01");
    REQUIRE(warm);
    CHECK(warm->verdict == Verdict::RejectedDuplicate);  // same as the 0.50 reply
}

TEST_CASE("output does not depend on the number of jobs") {
    Golden g;
    ExpansionConfig a;
    a.mode = Mode::Iterative;
    a.jobs = 1;
    ExpansionConfig b = a;
    b.jobs = 7;
    CHECK(run_mode(g, a).candidates == run_mode(g, b).candidates);
}

TEST_CASE("a target count stops the sweep early") {
    Golden g;
    ExpansionConfig cfg;
    cfg.mode = Mode::MultiTemperature;
    cfg.target_count = 5;
    cfg.jobs = 3;
    auto r = run_mode(g, cfg);
    CHECK(r.stopped_early);
    CHECK(r.valid().size() >= 5);
    CHECK(r.requests < 11 * g.raw.size() * g.guiding.size());
    // nothing after the request that met the target is kept
    ExpansionConfig full = cfg;
    full.target_count.reset();
    auto all = run_mode(g, full);
    for (std::size_t i = 0; i < r.candidates.size(); ++i) CHECK(r.candidates[i] == all.candidates[i]);
}

TEST_CASE("an interrupted run resumes from its journal") {
    Golden g;
    auto dir = testing::scratch_dir("journal");
    ExpansionConfig cfg;
    cfg.mode = Mode::Iterative;
    cfg.jobs = 2;
    auto reference = run_mode(g, cfg);

    {
        Journal journal(dir / "c.jsonl.journal");
        auto flaky = std::make_shared<FlakyBackend>(g.backend(), 10);
        CHECK_THROWS_AS(run_mode(g, cfg, {}, flaky, &journal), Error);
        CHECK(journal.size() == 10);
    }

    Journal journal(dir / "c.jsonl.journal");
    CHECK(journal.size() == 10);
    auto counting = g.backend();
    auto resumed = run_mode(g, cfg, {}, counting, &journal);
    CHECK(resumed.candidates == reference.candidates);
    CHECK(counting->calls() == reference.requests - 10);
    journal.discard();
    CHECK_FALSE(std::filesystem::exists(dir / "c.jsonl.journal"));
}

TEST_CASE("expansion needs guiding instructions and raw inputs") {
    Golden g;
    llm::ChatGateway gw(g.backend());
    Expander ex(gw, {}, ExpansionConfig{});
    CHECK_THROWS_AS(ex.run(g.raw, {}), Error);
    auto generated = g.raw;
    generated[0].origin = Origin::Generated;
    CHECK_THROWS_AS(ex.run(generated, g.guiding), Error);
}

TEST_CASE("an unmatched prompt surfaces as a backend error") {
    Golden g;
    auto empty = std::make_shared<llm::MockChatBackend>(std::vector<llm::MockFixture>{});
    try {
        run_mode(g, ExpansionConfig{}, {}, empty);
        FAIL("expected BadResponse");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::BadResponse);
    }
}
