#include <atomic>
#include <set>

#include "auditcalib/harness.hpp"
#include "auditcalib/ingest.hpp"
#include "auditcalib/process.hpp"
#include "auditcalib/resources.hpp"
#include "auditcalib/text.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace auditcalib;
using namespace auditcalib::harness;
using test_support::throws_code;

namespace {

const std::string kFixtures = AUDITCALIB_FIXTURES;

ingest::Document fixture_doc(const std::string& id = "PMC9000001") {
    return ingest::extract_text(text::read_file(kFixtures + "/cache/" + id + ".xml"), id);
}

std::vector<GroundTruthAnnotation> two_pairs() {
    return {{"PMC9000001", "3a", {"s"}}, {"PMC9000002", "10", {"t"}}};
}

std::size_t count_of(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (auto at = hay.find(needle); at != std::string::npos; at = hay.find(needle, at + 1)) ++n;
    return n;
}

DocumentSource fixture_source() { return cache_document_source(kFixtures + "/cache", true); }

}  // namespace

TEST_CASE("zero-shot prompt carries the stepwise instruction and no persona") {
    const auto p = build_prompt(PromptStrategy::zero_shot_cot, "3a", fixture_doc());
    CHECK(p.find("Think step by step") != std::string::npos);
    CHECK(p.find("auditor") == std::string::npos);
    CHECK(p.find("Checklist item 3a: ") != std::string::npos);
    CHECK(p.find(fixture_doc().combined) != std::string::npos);
    CHECK(p.find("Task reference: PMC9000001 | item 3a | zero_shot_cot") != std::string::npos);
}

TEST_CASE("role-playing prompt opens with the auditor persona") {
    const auto p = build_prompt(PromptStrategy::role_playing, "10", fixture_doc());
    CHECK(p.rfind("You are acting as an independent CONSORT compliance auditor", 0) == 0);
    CHECK(p.find("As an auditor") != std::string::npos);
    CHECK(p.find("Think step by step") == std::string::npos);
}

TEST_CASE("few-shot prompt places exemplars before the document") {
    const std::vector<Exemplar> ex{{"3a", "Exemplar sentence one.", "Relevant."},
                                   {"3a", "Exemplar sentence two, with a comma.", "Not relevant."}};
    const auto doc = fixture_doc();
    const auto p = build_prompt(PromptStrategy::few_shot, "3a", doc, ex);
    const auto doc_at = p.find(doc.combined);
    REQUIRE(doc_at != std::string::npos);
    for (const auto& e : ex) {
        const auto at = p.find(e.sentence);
        REQUIRE(at != std::string::npos);
        CHECK(at < doc_at);
    }
    CHECK(throws_code([&] { build_prompt(PromptStrategy::few_shot, "3a", doc); }, ErrorCode::missing_exemplars));
    CHECK(throws_code([&] { build_prompt(PromptStrategy::zero_shot_cot, "99z", doc); }, ErrorCode::unknown_item));
    CHECK(build_prompt(PromptStrategy::few_shot, "3a", doc, ex) == p);
}

TEST_CASE("document text holding placeholder names is not re-expanded") {
    const auto doc = ingest::make_document("PMC5", "Literal {exemplars} and {item_code}.", "Body.");
    const auto p = build_prompt(PromptStrategy::zero_shot_cot, "5", doc);
    CHECK(p.find("Literal {exemplars} and {item_code}.") != std::string::npos);
}

TEST_CASE("output contract names every response field exactly once") {
    const auto& contract = TemplateSet::builtin().output_contract();
    for (const auto f : kResponseFields) CHECK(count_of(contract, "\"" + std::string(f) + "\"") == 1);
    CHECK(TemplateSet::builtin().hash().size() == 64);
}

TEST_CASE("item registry and exemplar fallback") {
    const auto registry = ItemRegistry::builtin();
    CHECK(registry.description("0") == "Unknown Item");
    CHECK(registry.contains("3a"));
    CHECK(registry.contains("25"));
    const auto bank = ExemplarBank::builtin();
    CHECK(bank.for_item("17a").size() == 2);
    const auto custom = ExemplarBank::parse("item_code,sentence,judgment\n3a,s1,j1\n*,g,h\n", "inline");
    CHECK(custom.for_item("3a") == std::vector<Exemplar>{{"3a", "s1", "j1"}});
    CHECK(custom.for_item("4a") == std::vector<Exemplar>{{"*", "g", "h"}});
}

TEST_CASE("plan_runs cross product") {
    const std::vector<std::string> one_model{"m"};
    const auto plan = plan_runs(two_pairs(), one_model, kAllStrategies);
    CHECK(plan.entries.size() == 6);
    CHECK(std::is_sorted(plan.entries.begin(), plan.entries.end()));
    std::size_t total = 0;
    for (const auto& [_, n] : plan.by_strategy) total += n;
    CHECK(total == 6);
    CHECK(plan.by_model.at("m") == 6);

    auto dup = two_pairs();
    dup.push_back(dup.front());
    dup.push_back({"PMC9", "0", {"x"}});
    CHECK(plan_runs(dup, one_model, kAllStrategies).entries.size() == 6);

    std::vector<GroundTruthAnnotation> many;
    for (int i = 0; i < 572; ++i) many.push_back({"PMC" + std::to_string(i / 12), std::to_string(i % 12 + 1), {"s"}});
    const std::vector<std::string> two_models{"gemma", "medgemma"};
    const auto big = plan_runs(many, two_models, kAllStrategies);
    CHECK(big.entries.size() == 3432);
    CHECK(std::set<RecordKey>(big.entries.begin(), big.entries.end()).size() == 3432);

    CHECK(throws_code([&] { plan_runs({}, one_model, kAllStrategies); }, ErrorCode::empty_plan));
    CHECK(throws_code([&] { plan_runs(two_pairs(), {}, kAllStrategies); }, ErrorCode::empty_plan));
    CHECK(throws_code([&] { plan_runs(two_pairs(), one_model, {}); }, ErrorCode::empty_plan));
}

TEST_CASE("mock adapter determinism, separation and verbatim extraction") {
    const auto doc = fixture_doc();
    const auto bank = ExemplarBank::builtin();
    for (const auto s : kAllStrategies) {
        for (const std::string item : {"3a", "4a", "8a", "7a", "1a"}) {
            const auto prompt = build_prompt(s, item, doc, bank.for_item(item));
            const auto a1 = mock_adapter("model-a", prompt);
            CHECK(a1 == mock_adapter("model-a", prompt));
            const auto ra = ingest::parse_model_output(a1);
            const auto rb = ingest::parse_model_output(mock_adapter("model-b", prompt));
            const bool differ = ra.confidence != rb.confidence || ra.uncertainty != rb.uncertainty ||
                                ra.keyword_reliance != rb.keyword_reliance;
            CHECK(differ);
            CHECK(ra.confidence >= 50.0);
            CHECK(ra.confidence <= 100.0);
            CHECK(ra.uncertainty >= 0.0);
            CHECK(ra.uncertainty <= 60.0);
            for (const auto& sentence : ra.extracted_sentences) {
                CHECK(doc.combined.find(sentence) != std::string::npos);
            }
        }
    }
}

TEST_CASE("mock adapter without a task reference still answers") {
    const auto out = mock_adapter("m", "free text prompt");
    CHECK(out == mock_adapter("m", "free text prompt"));
    CHECK(ingest::parse_model_output(out).extracted_sentences.empty());
}

TEST_CASE("execute with the mock adapter is deterministic") {
    const std::vector<std::string> models{"m"};
    const auto plan = plan_runs(two_pairs(), models, kAllStrategies);
    const auto first = execute(plan, make_mock_adapter(), fixture_source());
    CHECK(first.table.size() == 6);
    CHECK(first.adapter_calls == 6);
    for (const auto& r : first.table.records()) CHECK(r.ok());
    const auto second = execute(plan, make_mock_adapter(), fixture_source());
    CHECK(ingest::records_to_csv(first.table) == ingest::records_to_csv(second.table));

    ExecuteOptions parallel;
    parallel.workers = 4;
    CHECK(execute(plan, make_mock_adapter(), fixture_source(), parallel).table == first.table);
    for (std::size_t i = 0; i < plan.entries.size(); ++i) CHECK(first.table.records()[i].key == plan.entries[i]);
}

TEST_CASE("execute isolates adapter failures") {
    const std::vector<std::string> models{"m"};
    const auto plan = plan_runs(two_pairs(), models, kAllStrategies);
    AdapterContract flaky = make_mock_adapter();
    flaky.call = [](const std::string& model, const std::string& prompt) -> std::string {
        if (prompt.find("PMC9000002 | item 10 | role_playing") != std::string::npos) {
            throw Error(ErrorCode::adapter_timeout, model, "simulated timeout");
        }
        return mock_adapter(model, prompt);
    };
    const auto res = execute(plan, flaky, fixture_source());
    int ok = 0, failed = 0;
    for (const auto& r : res.table.records()) {
        if (r.ok()) ++ok;
        if (r.status == RecordStatus::fetch_error) {
            ++failed;
            CHECK(r.key.strategy == PromptStrategy::role_playing);
            CHECK_FALSE(r.response.has_value());
        }
    }
    CHECK(ok == 5);
    CHECK(failed == 1);
}

TEST_CASE("execute maps unparseable and invalid outputs") {
    const std::vector<std::string> models{"m"};
    const std::vector<PromptStrategy> zs{PromptStrategy::zero_shot_cot};
    const auto plan = plan_runs(two_pairs(), models, zs);
    AdapterContract odd = make_mock_adapter();
    odd.call = [](const std::string&, const std::string& prompt) -> std::string {
        if (prompt.find("item 3a") != std::string::npos) return "I cannot answer.";
        return R"({"reasoning": "x", "extracted_sentences": [], "confidence": 140, "uncertainty": 1,
                  "cognitive_load": 1, "evidence_strength": "weak", "keyword_reliance": 1,
                  "alternative_interpretations": 0})";
    };
    const auto res = execute(plan, odd, fixture_source());
    REQUIRE(res.table.size() == 2);
    CHECK(res.table.find({"PMC9000001", "3a", "m", PromptStrategy::zero_shot_cot})->status ==
          RecordStatus::parse_error);
    CHECK(res.table.find({"PMC9000002", "10", "m", PromptStrategy::zero_shot_cot})->status ==
          RecordStatus::validation_error);
}

TEST_CASE("execute resumes after an interruption") {
    const std::vector<std::string> models{"m"};
    const auto plan = plan_runs(two_pairs(), models, kAllStrategies);
    std::atomic<bool> stop{false};
    std::atomic<int> calls{0};
    AdapterContract counting = make_mock_adapter();
    counting.call = [&](const std::string& model, const std::string& prompt) {
        if (++calls == 3) stop = true;
        return mock_adapter(model, prompt);
    };
    ExecuteOptions opts;
    opts.stop = &stop;
    const auto partial = execute(plan, counting, fixture_source(), opts);
    CHECK(partial.interrupted);
    CHECK(partial.table.size() == 3);

    calls = 0;
    ExecuteOptions resume;
    resume.resume_from = &partial.table;
    const auto rest = execute(plan, counting, fixture_source(), resume);
    CHECK(calls == 3);
    CHECK(rest.carried_over == 3);
    CHECK(rest.table == execute(plan, make_mock_adapter(), fixture_source()).table);

    // fetch_error records are retried.
    RecordTable with_failure;
    for (auto r : rest.table.records()) {
        if (r.key == plan.entries[0]) {
            r.response.reset();
            r.status = RecordStatus::fetch_error;
        }
        with_failure.insert(r);
    }
    calls = 0;
    resume.resume_from = &with_failure;
    CHECK(execute(plan, counting, fixture_source(), resume).table == rest.table);
    CHECK(calls == 1);
}

TEST_CASE("execute marks entries with an unresolvable document") {
    const std::vector<GroundTruthAnnotation> ann{{"PMC0000404", "3a", {"s"}}, {"PMC9000001", "3a", {"s"}}};
    const std::vector<std::string> models{"m"};
    const auto res = execute(plan_runs(ann, models, kAllStrategies), make_mock_adapter(), fixture_source());
    int fetch_errors = 0;
    for (const auto& r : res.table.records()) fetch_errors += r.status == RecordStatus::fetch_error;
    CHECK(fetch_errors == 3);
    CHECK(res.adapter_calls == 3);
    CHECK(throws_code([&] { execute(plan_runs(ann, models, kAllStrategies), make_mock_adapter(), nullptr); },
                      ErrorCode::config));
    const std::vector<GroundTruthAnnotation> unknown{{"PMC9000001", "99z", {"s"}}};
    CHECK(throws_code([&] { execute(plan_runs(unknown, models, kAllStrategies), make_mock_adapter(), fixture_source()); },
                      ErrorCode::unknown_item));
}

TEST_CASE("command adapter") {
    const auto echo_model = make_command_adapter("printf '%s' \"$AUDITCALIB_MODEL_ID\"", std::chrono::seconds(10));
    CHECK(echo_model.call("model-x", "prompt") == "model-x");

    const auto cat = make_command_adapter("cat", std::chrono::seconds(10));
    std::string big(1 << 20, 'q');
    CHECK(cat.call("m", big) == big);

    const auto slow = make_command_adapter("sleep 5", std::chrono::milliseconds(200));
    const auto start = std::chrono::steady_clock::now();
    CHECK(throws_code([&] { slow.call("m", "p"); }, ErrorCode::adapter_timeout));
    CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(3));

    const auto failing = make_command_adapter("echo broken >&2; exit 3", std::chrono::seconds(10));
    const auto e = test_support::caught([&] { failing.call("m", "p"); });
    REQUIRE(e);
    CHECK(e->code() == ErrorCode::adapter_failure);
    CHECK(std::string(e->what()).find("broken") != std::string::npos);
}

TEST_CASE("command adapter drives a full execute") {
    const std::vector<std::string> models{"m"};
    const auto plan = plan_runs(two_pairs(), models, kAllStrategies);
    const std::string fixed = R"({"reasoning": "Fixed.", "extracted_sentences": [], "confidence": 70,
        "uncertainty": 10, "cognitive_load": 2, "evidence_strength": "weak", "keyword_reliance": 5,
        "alternative_interpretations": 1})";
    const auto res = execute(plan, make_command_adapter("cat > /dev/null; printf '%s' '" + fixed + "'"),
                             fixture_source());
    for (const auto& r : res.table.records()) {
        REQUIRE(r.ok());
        CHECK(r.response->confidence == 70.0);
    }
}

TEST_CASE("line process exchanges one line per request") {
    process::LineProcess child("while IFS= read -r line; do echo \"<$line>\"; done", std::chrono::seconds(5));
    CHECK(child.exchange("a\tb") == "<a\tb>");
    CHECK(child.exchange("second") == "<second>");
    process::LineProcess mute("sleep 5", std::chrono::milliseconds(100));
    CHECK(throws_code([&] { mute.exchange("x"); }, ErrorCode::adapter_timeout));
}
