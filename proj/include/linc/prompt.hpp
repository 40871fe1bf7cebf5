#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace linc {

struct ClassDescriptor {
    std::size_t index = 0;
    std::string display_name;
    std::string verbalizer;
};

/// Ordered set of classes. Indices are contiguous from zero and verbalizers
/// are distinct and non-empty; the constructor enforces this.
class LabelSpace {
public:
    explicit LabelSpace(std::vector<ClassDescriptor> classes);

    /// Display names default to the verbalizers.
    static LabelSpace from_verbalizers(const std::vector<std::string>& verbalizers,
                                       const std::vector<std::string>& display_names = {});

    std::size_t size() const noexcept { return classes_.size(); }
    const ClassDescriptor& operator[](std::size_t i) const { return classes_.at(i); }
    const std::vector<ClassDescriptor>& classes() const noexcept { return classes_; }
    std::vector<std::string> verbalizers() const;
    bool contains(int label) const noexcept {
        return label >= 0 && static_cast<std::size_t>(label) < classes_.size();
    }

private:
    std::vector<ClassDescriptor> classes_;
};

/// A task input. Single-sentence tasks use `text`; pair tasks (premise and
/// hypothesis) put the premise in `text` and the hypothesis in `hypothesis`.
struct TextInput {
    std::string text;
    std::optional<std::string> hypothesis;

    TextInput() = default;
    TextInput(std::string t) : text(std::move(t)) {}  // NOLINT(google-explicit-constructor)
    TextInput(const char* t) : text(t) {}             // NOLINT(google-explicit-constructor)
    TextInput(std::string premise, std::string hyp)
        : text(std::move(premise)), hypothesis(std::move(hyp)) {}

    bool is_pair() const noexcept { return hypothesis.has_value(); }
    friend bool operator==(const TextInput&, const TextInput&) = default;
};

/// Declarative prompt format. Placeholders: `{input}` (or `{premise}` plus
/// `{hypothesis}` for pair tasks) in input_pattern and `{label}` in
/// output_pattern.
struct PromptTemplate {
    std::string name;
    std::string header;
    std::string input_pattern;
    std::string output_pattern;
    std::string demo_separator = "\n\n";
    std::string query_suffix;

    /// Throws TemplateError when the placeholder counts are wrong.
    void validate() const;
    bool is_pair_template() const;
};

struct Demonstration {
    TextInput input_text;
    int label = 0;
    friend bool operator==(const Demonstration&, const Demonstration&) = default;
};

using LabeledExample = Demonstration;

struct PromptProvenance {
    std::optional<std::uint64_t> seed;
    std::string note;
};

struct Prompt {
    std::string rendered_text;
    std::size_t demo_count = 0;
    TextInput query_input;
    PromptProvenance provenance;
};

std::string render_input(const TextInput& input, const PromptTemplate& t);

std::string render_demonstration(const Demonstration& d, const PromptTemplate& t,
                                 const LabelSpace& ls);

Prompt assemble_prompt(const TextInput& query, std::span<const Demonstration> demos,
                       const PromptTemplate& t, const LabelSpace& ls);

struct ValidationPrompt {
    Prompt prompt;
    int label = 0;
};

/// One prompt per validation example, each embedding the same demonstrations.
std::vector<ValidationPrompt> build_validation_prompts(std::span<const LabeledExample> val_set,
                                                       std::span<const Demonstration> demos,
                                                       const PromptTemplate& t,
                                                       const LabelSpace& ls);

inline constexpr const char* kDefaultContentFreeToken = "N/A";

/// Pair templates receive the token in both slots.
Prompt content_free_prompt(std::span<const Demonstration> demos, const PromptTemplate& t,
                           const LabelSpace& ls,
                           const std::string& cf_token = kDefaultContentFreeToken);

/// Draws k examples without replacement. With `proportions`, class counts are
/// k * fraction rounded by largest remainder; the result order is a seeded
/// shuffle either way.
std::vector<Demonstration> sample_demonstrations(
    std::span<const LabeledExample> dataset, std::size_t k, std::uint64_t seed,
    const std::optional<std::vector<double>>& proportions = std::nullopt);

/// Class counts for `k` draws under `proportions` (largest-remainder rounding).
std::vector<std::size_t> proportional_counts(std::size_t k, std::span<const double> proportions);

std::vector<Demonstration> permute_demonstrations(std::vector<Demonstration> demos,
                                                  std::uint64_t seed);

struct TokenBudget {
    std::size_t estimate = 0;
    bool fits = true;
};

/// ceil(characters / 4) unless the backend reported an exact count.
TokenBudget estimate_token_budget(const Prompt& p, std::size_t max_tokens,
                                  std::optional<std::size_t> backend_count = std::nullopt);

std::size_t utf8_length(const std::string& s);

}  // namespace linc
