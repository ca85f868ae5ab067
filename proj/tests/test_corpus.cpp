#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "doctest.h"
#include "unlearn/corpus.h"
#include "unlearn/errors.h"

using namespace unlearn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "unlearn_corpus_tests";
    fs::create_directories(dir);
    return dir / name;
}

void write_pairs(const fs::path& path, std::size_t n) {
    std::ofstream out(path);
    for (std::size_t i = 0; i < n; ++i) {
        out << R"({"question": "q)" << i << R"(?", "answer": "a)" << i << R"("})" << "\n";
    }
}

}  // namespace

TEST_CASE("load_tofu_dataset splits by ratio") {
    const auto path = scratch("pairs400.jsonl");
    write_pairs(path, 400);
    const auto bundle = load_tofu_dataset(path, 0.05);
    CHECK(bundle.forget.size() == 20);
    CHECK(bundle.retain.size() == 380);
    CHECK(bundle.full.size() == 400);
    CHECK(bundle.contextual_forget.size() == 20);
    check_bundle_invariants(bundle);

    const auto big = scratch("pairs4000.jsonl");
    write_pairs(big, 4000);
    CHECK(load_tofu_dataset(big, 0.01).forget.size() == 40);
    CHECK(load_tofu_dataset(big, 0.10).forget.size() == 400);
}

TEST_CASE("load_tofu_dataset reports the line of a malformed record") {
    const auto path = scratch("bad_line7.jsonl");
    {
        std::ofstream out(path);
        for (int i = 1; i <= 10; ++i) {
            if (i == 7) {
                out << R"({"question": "q7?"})" << "\n";
            } else {
                out << R"({"question": "q?", "answer": "a", "id": ")" << i << R"("})" << "\n";
            }
        }
    }
    try {
        load_tofu_dataset(path, 0.1);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 7);
    }
}

TEST_CASE("load_tofu_dataset rejects empty files and bad ratios") {
    const auto path = scratch("empty.jsonl");
    { std::ofstream out(path); }
    CHECK_THROWS_AS(load_tofu_dataset(path, 0.05), EmptyDatasetError);
    write_pairs(path, 10);
    CHECK_THROWS_AS(load_tofu_dataset(path, 0.0), ValidationError);
    CHECK_THROWS_AS(load_tofu_dataset(path, 1.0), ValidationError);
    CHECK_THROWS_AS(load_tofu_dataset(scratch("missing.jsonl"), 0.05), NotFoundError);
}

TEST_CASE("published split labels win over the ratio") {
    const auto path = scratch("labelled.jsonl");
    {
        std::ofstream out(path);
        out << R"({"id": "a", "question": "q1?", "answer": "a1", "split": "forget"})" << "\n";
        out << R"({"id": "b", "question": "q2?", "answer": "a2", "split": "retain"})" << "\n";
        out << R"({"id": "c", "question": "q3?", "answer": "a3", "split": "retain"})" << "\n";
        out << R"({"id": "d", "question": "q4?", "answer": "a4", "split": "holdout"})" << "\n";
    }
    const auto bundle = load_tofu_dataset(path, 0.5);
    REQUIRE(bundle.forget.size() == 1);
    CHECK(bundle.forget[0].id == "a");
    CHECK(bundle.retain.size() == 2);
    CHECK(bundle.holdout.size() == 1);
    CHECK(bundle.full.size() == 3);
}

TEST_CASE("write_dataset round-trips through load_tofu_dataset") {
    const auto original = generate_synthetic_corpus(3, 4, 3, 0.25);
    const auto path = scratch("roundtrip.jsonl");
    write_dataset(path, original.full);
    const auto loaded = load_tofu_dataset(path, 0.25);
    REQUIRE(loaded.full.size() == original.full.size());
    for (std::size_t i = 0; i < loaded.full.size(); ++i) {
        CHECK(loaded.full[i].id == original.full[i].id);
        CHECK(loaded.full[i].answer == original.full[i].answer);
        CHECK(loaded.full[i].split == original.full[i].split);
    }
}

TEST_CASE("contextual forget set from gold answers") {
    const auto bundle = generate_synthetic_corpus(42, 20, 10);
    const auto result = build_contextual_forget_set(bundle.forget, TargetSource::gold_answer, {}, {});
    REQUIRE(result.examples.size() == bundle.forget.size());
    for (std::size_t i = 0; i < result.examples.size(); ++i) {
        const auto& ctx = result.examples[i];
        CHECK(ctx.question == bundle.forget[i].question);
        CHECK(ctx.context == bundle.forget[i].answer);
        CHECK(ctx.target_response == bundle.forget[i].answer);
        CHECK(ctx.source_id == bundle.forget[i].id);
        CHECK(ctx.variant == ContextVariant::original);
    }
}

TEST_CASE("contextual forget set from reference responses drops empty decodes") {
    const auto bundle = generate_synthetic_corpus(42, 20, 10);
    PromptTemplateSet templates;
    std::size_t calls = 0;
    ReferenceResponder reference = [&](const std::string& prompt) -> std::string {
        ++calls;
        CHECK(prompt.find(templates.instruction) != std::string::npos);
        return calls % 4 == 0 ? "  " : "reply " + std::to_string(calls);
    };
    const auto result =
        build_contextual_forget_set(bundle.forget, TargetSource::reference_model_response, reference, templates);
    CHECK(calls == 10);
    CHECK(result.excluded_empty == 2);
    CHECK(result.examples.size() == 8);
    CHECK(result.examples[0].target_response == "reply 1");
    CHECK(result.examples[0].gold_answer == bundle.forget[0].answer);
    CHECK_THROWS_AS(
        build_contextual_forget_set(bundle.forget, TargetSource::reference_model_response, {}, templates),
        ContractError);
}

TEST_CASE("synthetic corpus counts, determinism and whole-profile split") {
    const auto a = generate_synthetic_corpus(42, 20, 10);
    const auto b = generate_synthetic_corpus(42, 20, 10);
    CHECK(a.full.size() == 200);
    const auto pa = scratch("synthetic_a.jsonl");
    const auto pb = scratch("synthetic_b.jsonl");
    write_dataset(pa, a.full);
    write_dataset(pb, b.full);
    std::ifstream ia(pa), ib(pb);
    const std::string sa((std::istreambuf_iterator<char>(ia)), {});
    const std::string sb((std::istreambuf_iterator<char>(ib)), {});
    CHECK(sa == sb);

    CHECK(a.forget.size() == 10);
    std::set<std::string> forget_profiles, retain_profiles;
    for (const auto& ex : a.forget) forget_profiles.insert(ex.profile_id);
    for (const auto& ex : a.retain) retain_profiles.insert(ex.profile_id);
    CHECK(forget_profiles.size() == 1);
    for (const auto& p : forget_profiles) CHECK_FALSE(retain_profiles.contains(p));

    const auto c = generate_synthetic_corpus(43, 20, 10);
    CHECK(c.full[0].answer != a.full[0].answer);
}

TEST_CASE("synthetic corpus rejects bad sizes") {
    CHECK_THROWS_AS(generate_synthetic_corpus(1, 1, 3), ValidationError);
    CHECK_THROWS_AS(generate_synthetic_corpus(1, 4, 0), ValidationError);
    CHECK_THROWS_AS(generate_synthetic_corpus(1, synthetic_profile_capacity() + 1, 3), CapacityError);
    CHECK_THROWS_AS(generate_synthetic_corpus(1, 4, synthetic_templates_per_profile() + 1), CapacityError);
    CHECK_NOTHROW(generate_synthetic_corpus(1, synthetic_profile_capacity(), 10));
}

TEST_CASE("synthetic profiles use distinct attribute values") {
    const auto bundle = generate_synthetic_corpus(9, 30, 10);
    for (std::size_t q = 0; q < 10; ++q) {
        std::set<std::string> answers;
        for (std::size_t p = 0; p < 30; ++p) answers.insert(bundle.full[p * 10 + q].answer);
        CHECK(answers.size() == 30);
    }
}

TEST_CASE("contextual prompt carries the three blocks in order inside the chat frame") {
    PromptTemplateSet templates;
    ContextualExample ex{"What specific genre is Nikolai Abilov known for?",
                         "Nikolai Abilov is most celebrated for his compelling writing in the African American genre.",
                         "", "x", ContextVariant::original, ""};
    const std::string rendered = render_prompt(ex, PromptMode::contextual, templates);
    const auto i = rendered.find("Answer the question based on the given context.");
    const auto c = rendered.find("Context: Nikolai Abilov is most celebrated");
    const auto q = rendered.find("Question: What specific genre");
    REQUIRE(i != std::string::npos);
    REQUIRE(c != std::string::npos);
    REQUIRE(q != std::string::npos);
    CHECK(i < c);
    CHECK(c < q);
    CHECK(rendered.starts_with("<bos><system> You are a helpful assistant.<eos>\n<user> "));
    CHECK(rendered.ends_with("<assistant> "));

    const std::string direct = render_prompt(ex, PromptMode::direct, templates);
    CHECK(direct.find("Context:") == std::string::npos);
    CHECK(strip_chat_frame(direct, templates) == "Question: What specific genre is Nikolai Abilov known for?");
}

TEST_CASE("render_prompt errors") {
    PromptTemplateSet templates;
    ContextualExample empty{"q?", "", "", "x", ContextVariant::original, ""};
    CHECK_THROWS_AS(render_prompt(empty, PromptMode::contextual, templates), ValidationError);
    QaExample qa{"id", "q?", "a", "p", SplitTag::retain};
    CHECK_THROWS_AS(render_prompt(qa, PromptMode::contextual, templates), ContractError);
    CHECK_NOTHROW(render_prompt(qa, PromptMode::direct, templates));
}

TEST_CASE("property: contextual prompts parse back into their parts") {
    std::mt19937_64 rng(2024);
    const std::string alphabet = "abcdefghij klmnop,.?'!";
    auto random_text = [&](std::size_t min_len) {
        std::uniform_int_distribution<std::size_t> len(min_len, 40);
        std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
        std::string s;
        const std::size_t n = len(rng);
        for (std::size_t i = 0; i < n; ++i) s.push_back(alphabet[pick(rng)]);
        return s;
    };
    PromptTemplateSet templates;
    for (int trial = 0; trial < 300; ++trial) {
        ContextualExample ex{random_text(0), random_text(1), "", "x", ContextVariant::paraphrased, ""};
        const auto rendered = render_prompt(ex, PromptMode::contextual, templates);
        const auto parts = parse_contextual_prompt(strip_chat_frame(rendered, templates), templates);
        CHECK(parts.instruction == templates.instruction);
        CHECK(parts.context == ex.context);
        CHECK(parts.question == ex.question);
    }
}

TEST_CASE("property: split_dataset partitions every random dataset") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        std::uniform_int_distribution<std::size_t> size(2, 60);
        std::uniform_real_distribution<double> ratio(0.01, 0.99);
        const std::size_t n = size(rng);
        const double r = ratio(rng);
        std::vector<QaExample> examples;
        for (std::size_t i = 0; i < n; ++i) {
            examples.push_back(QaExample{"id" + std::to_string(i), "q?", "a", "p", SplitTag::retain});
        }
        const auto bundle = split_dataset(examples, r);
        check_bundle_invariants(bundle);
        CHECK(bundle.forget.size() + bundle.retain.size() == n);
        const double expected = r * static_cast<double>(n);
        CHECK(std::abs(static_cast<double>(bundle.forget.size()) - expected) <= 1.0);
        for (std::size_t i = 0; i < bundle.contextual_forget.size(); ++i) {
            CHECK(bundle.contextual_forget[i].context == bundle.forget[i].answer);
        }
    }
}

TEST_CASE("context variant files are ingested and validated") {
    const auto bundle = generate_synthetic_corpus(42, 20, 10);
    std::vector<ContextualExample> variants;
    for (const auto& ex : bundle.forget) {
        variants.push_back(ContextualExample{ex.question, "In other words, " + ex.answer, ex.answer, ex.id,
                                             ContextVariant::paraphrased, ex.answer});
    }
    const auto path = scratch("variants.jsonl");
    write_context_variants(path, variants);
    const auto loaded = load_context_variants(path, bundle);
    REQUIRE(loaded.size() == variants.size());
    CHECK(loaded[0].variant == ContextVariant::paraphrased);
    CHECK(loaded[0].context == variants[0].context);
    CHECK(loaded[0].gold_answer == bundle.forget[0].answer);

    const auto bad = scratch("variants_bad.jsonl");
    {
        std::ofstream out(bad);
        out << R"({"question": "q?", "context": "not the answer", "source_id": ")" << bundle.forget[0].id
            << R"(", "variant": "original"})" << "\n";
    }
    CHECK_THROWS_AS(load_context_variants(bad, bundle), ParseError);
    {
        std::ofstream out(bad);
        out << R"({"question": "q?", "context": "c", "source_id": "nope", "variant": "reasoning"})" << "\n";
    }
    CHECK_THROWS_AS(load_context_variants(bad, bundle), ParseError);
}
