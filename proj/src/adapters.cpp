#include <cstdint>
#include <cstdio>

#include "auditcalib/error.hpp"
#include "auditcalib/harness.hpp"
#include "auditcalib/process.hpp"
#include "auditcalib/text.hpp"

namespace auditcalib::harness {

namespace {

constexpr std::string_view kArticleOpen = "=== ARTICLE ";
constexpr std::string_view kArticleClose = "\n=== END ARTICLE ===";

class SplitMix {
public:
    explicit SplitMix(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    std::uint64_t below(std::uint64_t n) { return next() % n; }

private:
    std::uint64_t state_;
};

struct PromptFacts {
    std::string pmcid, item, strategy, description;
    std::string_view article;
};

std::string_view line_after(std::string_view text, std::string_view marker) {
    const auto at = text.rfind(marker);
    if (at == std::string_view::npos) return {};
    const auto start = at + marker.size();
    const auto end = text.find('\n', start);
    return text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
}

PromptFacts read_prompt(std::string_view prompt) {
    PromptFacts f;
    const auto ref = line_after(prompt, kTaskReferencePrefix);
    if (!ref.empty()) {
        const auto a = ref.find(" | item ");
        const auto b = ref.rfind(" | ");
        if (a != std::string_view::npos && b != std::string_view::npos && b > a) {
            f.pmcid = std::string(ref.substr(0, a));
            f.item = std::string(ref.substr(a + 8, b - a - 8));
            f.strategy = std::string(ref.substr(b + 3));
        }
    }
    if (!f.item.empty()) f.description = text::trim(line_after(prompt, "Checklist item " + f.item + ": "));
    const auto open = prompt.find(kArticleOpen);
    if (open != std::string_view::npos) {
        const auto start = prompt.find('\n', open);
        const auto close = prompt.find(kArticleClose, start);
        if (start != std::string_view::npos && close != std::string_view::npos) {
            f.article = prompt.substr(start + 1, close - start - 1);
        }
    }
    return f;
}

// Sentence-like slices of the article: cut after . ! ? before whitespace, and
// at line breaks. Each slice is returned verbatim.
std::vector<std::string_view> sentences(std::string_view article) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    auto emit = [&](std::size_t end) {
        std::string_view s = article.substr(start, end - start);
        while (!s.empty() && (s.front() == ' ' || s.front() == '\n')) s.remove_prefix(1);
        while (!s.empty() && (s.back() == ' ' || s.back() == '\n')) s.remove_suffix(1);
        if (text::utf8_length(s) >= 20) out.push_back(s);
    };
    for (std::size_t i = 0; i < article.size(); ++i) {
        const char c = article[i];
        const bool terminal = (c == '.' || c == '!' || c == '?') &&
                              (i + 1 == article.size() || article[i + 1] == ' ' || article[i + 1] == '\n');
        if (c == '\n' || terminal) {
            emit(terminal ? i + 1 : i);
            start = i + 1;
        }
    }
    if (start < article.size()) emit(article.size());
    return out;
}

double hundredths(SplitMix& rng, int lo, int hi) {
    return lo + static_cast<double>(rng.below(static_cast<std::uint64_t>(hi - lo) * 100 + 1)) / 100.0;
}

std::string opening(const std::string& strategy, const std::string& item) {
    if (strategy == "role_playing") {
        return "As an auditor, my thought process is as follows: first, I will formulate a search strategy for item " +
               item + ", then execute it and evaluate what I find.";
    }
    if (strategy == "few_shot") {
        return "Following the worked examples, I compared the sentences of the article with the pattern for item " +
               item + ".";
    }
    return "Step 1: I restate what item " + item + " requires. Step 2: I search the article for sentences that "
           "address it. Step 3: I check each candidate against the requirement.";
}

}  // namespace

std::string mock_adapter(const std::string& model_id, const std::string& prompt) {
    const PromptFacts f = read_prompt(prompt);
    std::string seed_text = model_id + '\x1f' + f.pmcid + '\x1f' + f.item + '\x1f' + f.strategy;
    if (f.pmcid.empty() && f.item.empty()) seed_text += '\x1f' + prompt;
    SplitMix rng(text::fnv1a64(seed_text));

    nlohmann::json out;
    const double confidence = hundredths(rng, 50, 100);
    const double uncertainty = hundredths(rng, 0, 60);
    const double keyword_reliance = hundredths(rng, 0, 100);
    const int cognitive_load = 1 + static_cast<int>(rng.below(5));
    const int alternatives = static_cast<int>(rng.below(4));

    const auto candidates = sentences(f.article);
    const std::uint64_t roll = rng.below(10);
    std::size_t wanted = roll < 2 ? 0 : roll < 7 ? 1 : 2;
    wanted = std::min(wanted, candidates.size());
    std::vector<std::size_t> picked;
    while (picked.size() < wanted) {
        const auto idx = static_cast<std::size_t>(rng.below(candidates.size()));
        if (std::find(picked.begin(), picked.end(), idx) == picked.end()) picked.push_back(idx);
    }
    std::sort(picked.begin(), picked.end());
    std::vector<std::string> extracted;
    for (const auto idx : picked) extracted.emplace_back(candidates[idx]);

    static constexpr std::string_view kStrengths[] = {"weak", "moderate", "strong"};
    const std::string_view strength = extracted.empty() ? "weak" : kStrengths[rng.below(3)];

    std::string reasoning = opening(f.strategy, f.item.empty() ? "under review" : f.item);
    if (extracted.empty()) {
        reasoning += " No relevant sentence was found for this item.";
    } else {
        reasoning += " I selected " + std::to_string(extracted.size()) + " sentence" +
                     (extracted.size() > 1 ? "s" : "") + " that address";
        reasoning += f.description.empty() ? std::string(" the item.") : ": " + text::to_lower_ascii(f.description) + ".";
    }
    if (rng.below(4) == 0) reasoning += " I am not sure the reporting is complete; further evidence required.";
    if (rng.below(3) == 0) reasoning += " However, the wording in the article is brief.";

    out["reasoning"] = reasoning;
    out["extracted_sentences"] = extracted;
    out["confidence"] = confidence;
    out["uncertainty"] = uncertainty;
    out["cognitive_load"] = cognitive_load;
    out["evidence_strength"] = strength;
    out["keyword_reliance"] = keyword_reliance;
    out["alternative_interpretations"] = alternatives;
    return "```json\n" + out.dump(2) + "\n```\n";
}

AdapterContract make_mock_adapter() {
    return {"mock", [](const std::string& model, const std::string& prompt) { return mock_adapter(model, prompt); },
            std::chrono::milliseconds(120000)};
}

AdapterContract make_command_adapter(const std::string& command, std::chrono::milliseconds timeout) {
    AdapterContract a;
    a.name = "command";
    a.timeout = timeout;
    a.call = [command, timeout](const std::string& model, const std::string& prompt) {
        const auto r = process::run(command, prompt, timeout, {{"AUDITCALIB_MODEL_ID", model}});
        if (r.exit_code != 0) {
            std::string detail = text::trim(std::string(text::utf8_prefix_bytes(r.err, 300)));
            throw Error(ErrorCode::adapter_failure, model,
                        "command exited with " + std::to_string(r.exit_code) + (detail.empty() ? "" : ": " + detail));
        }
        return r.out;
    };
    return a;
}

}  // namespace auditcalib::harness
