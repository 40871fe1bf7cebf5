#include "linc/prompt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "linc/error.hpp"
#include "linc/rng.hpp"

namespace linc {

namespace {

constexpr std::string_view kInput = "{input}";
constexpr std::string_view kPremise = "{premise}";
constexpr std::string_view kHypothesis = "{hypothesis}";
constexpr std::string_view kLabel = "{label}";

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
    std::size_t n = 0;
    for (auto pos = haystack.find(needle); pos != std::string_view::npos;
         pos = haystack.find(needle, pos + needle.size())) {
        ++n;
    }
    return n;
}

std::string replace_once(std::string pattern, std::string_view placeholder,
                         const std::string& value) {
    const auto pos = pattern.find(placeholder);
    if (pos != std::string::npos) pattern.replace(pos, placeholder.size(), value);
    return pattern;
}

}  // namespace

LabelSpace::LabelSpace(std::vector<ClassDescriptor> classes) : classes_(std::move(classes)) {
    if (classes_.size() < 2) {
        throw ConfigError("label space needs at least 2 classes, got " +
                          std::to_string(classes_.size()));
    }
    std::set<std::string> seen;
    for (std::size_t i = 0; i < classes_.size(); ++i) {
        if (classes_[i].index != i) {
            throw ConfigError("label space indices must be contiguous from 0; class at position " +
                              std::to_string(i) + " has index " +
                              std::to_string(classes_[i].index));
        }
        if (classes_[i].verbalizer.empty()) {
            throw ConfigError("empty verbalizer for class " + std::to_string(i));
        }
        if (!seen.insert(classes_[i].verbalizer).second) {
            throw ConfigError("duplicate verbalizer '" + classes_[i].verbalizer + "'");
        }
    }
}

LabelSpace LabelSpace::from_verbalizers(const std::vector<std::string>& verbalizers,
                                        const std::vector<std::string>& display_names) {
    if (!display_names.empty() && display_names.size() != verbalizers.size()) {
        throw ConfigError("display name count does not match verbalizer count");
    }
    std::vector<ClassDescriptor> classes;
    classes.reserve(verbalizers.size());
    for (std::size_t i = 0; i < verbalizers.size(); ++i) {
        classes.push_back({i, display_names.empty() ? verbalizers[i] : display_names[i],
                           verbalizers[i]});
    }
    return LabelSpace(std::move(classes));
}

std::vector<std::string> LabelSpace::verbalizers() const {
    std::vector<std::string> out;
    out.reserve(classes_.size());
    for (const auto& c : classes_) out.push_back(c.verbalizer);
    return out;
}

bool PromptTemplate::is_pair_template() const {
    return count_occurrences(input_pattern, kPremise) > 0 ||
           count_occurrences(input_pattern, kHypothesis) > 0;
}

void PromptTemplate::validate() const {
    const auto n_input = count_occurrences(input_pattern, kInput);
    const auto n_premise = count_occurrences(input_pattern, kPremise);
    const auto n_hyp = count_occurrences(input_pattern, kHypothesis);
    const bool single = n_input == 1 && n_premise == 0 && n_hyp == 0;
    const bool pair = n_input == 0 && n_premise == 1 && n_hyp == 1;
    if (!single && !pair) {
        throw TemplateError("template '" + name +
                            "': input_pattern needs exactly one {input}, or one {premise} "
                            "and one {hypothesis}");
    }
    if (count_occurrences(output_pattern, kLabel) != 1) {
        throw TemplateError("template '" + name + "': output_pattern needs exactly one {label}");
    }
}

std::string render_input(const TextInput& input, const PromptTemplate& t) {
    if (t.is_pair_template()) {
        if (!input.is_pair()) {
            throw TemplateError("template '" + t.name + "' expects premise/hypothesis input");
        }
        return replace_once(replace_once(t.input_pattern, kPremise, input.text), kHypothesis,
                            *input.hypothesis);
    }
    if (input.is_pair()) {
        throw TemplateError("template '" + t.name + "' expects single-text input");
    }
    return replace_once(t.input_pattern, kInput, input.text);
}

std::string render_demonstration(const Demonstration& d, const PromptTemplate& t,
                                 const LabelSpace& ls) {
    if (!ls.contains(d.label)) {
        throw InvalidLabelError("label " + std::to_string(d.label) + " outside [0, " +
                                std::to_string(ls.size()) + ")");
    }
    return render_input(d.input_text, t) +
           replace_once(t.output_pattern, kLabel, ls[static_cast<std::size_t>(d.label)].verbalizer);
}

Prompt assemble_prompt(const TextInput& query, std::span<const Demonstration> demos,
                       const PromptTemplate& t, const LabelSpace& ls) {
    std::string text = t.header;
    for (const auto& d : demos) {
        text += render_demonstration(d, t, ls);
        text += t.demo_separator;
    }
    text += render_input(query, t);
    text += t.query_suffix;
    return Prompt{std::move(text), demos.size(), query, {}};
}

std::vector<ValidationPrompt> build_validation_prompts(std::span<const LabeledExample> val_set,
                                                       std::span<const Demonstration> demos,
                                                       const PromptTemplate& t,
                                                       const LabelSpace& ls) {
    std::vector<ValidationPrompt> out;
    out.reserve(val_set.size());
    for (const auto& v : val_set) {
        if (!ls.contains(v.label)) {
            throw InvalidLabelError("validation label " + std::to_string(v.label) +
                                    " outside label space");
        }
        out.push_back({assemble_prompt(v.input_text, demos, t, ls), v.label});
    }
    return out;
}

Prompt content_free_prompt(std::span<const Demonstration> demos, const PromptTemplate& t,
                           const LabelSpace& ls, const std::string& cf_token) {
    TextInput query = t.is_pair_template() ? TextInput(cf_token, cf_token) : TextInput(cf_token);
    Prompt p = assemble_prompt(query, demos, t, ls);
    p.provenance.note = "content-free";
    return p;
}

std::vector<std::size_t> proportional_counts(std::size_t k, std::span<const double> proportions) {
    if (proportions.empty()) throw SamplingError("empty label proportions");
    double sum = 0.0;
    for (double p : proportions) {
        if (!(p >= 0.0) || !std::isfinite(p)) {
            throw SamplingError("label proportions must be finite and non-negative");
        }
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw SamplingError("label proportions sum to " + std::to_string(sum) + ", expected 1");
    }
    std::vector<std::size_t> counts(proportions.size());
    std::vector<double> remainder(proportions.size());
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < proportions.size(); ++c) {
        const double exact = static_cast<double>(k) * proportions[c];
        counts[c] = static_cast<std::size_t>(std::floor(exact));
        remainder[c] = exact - static_cast<double>(counts[c]);
        assigned += counts[c];
    }
    std::vector<std::size_t> order(proportions.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t i = 0; assigned < k; ++i, ++assigned) ++counts[order[i % order.size()]];
    return counts;
}

std::vector<Demonstration> sample_demonstrations(std::span<const LabeledExample> dataset,
                                                 std::size_t k, std::uint64_t seed,
                                                 const std::optional<std::vector<double>>& proportions) {
    if (k > dataset.size()) {
        throw SamplingError("cannot draw " + std::to_string(k) + " demonstrations from " +
                            std::to_string(dataset.size()) + " examples");
    }
    Rng rng(seed);
    std::vector<Demonstration> out;
    out.reserve(k);
    if (!proportions) {
        std::vector<std::size_t> idx(dataset.size());
        std::iota(idx.begin(), idx.end(), 0);
        rng.shuffle(std::span(idx));
        for (std::size_t i = 0; i < k; ++i) out.push_back(dataset[idx[i]]);
        return out;
    }

    const auto counts = proportional_counts(k, *proportions);
    std::vector<std::vector<std::size_t>> pools(counts.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const int y = dataset[i].label;
        if (y >= 0 && static_cast<std::size_t>(y) < pools.size()) {
            pools[static_cast<std::size_t>(y)].push_back(i);
        }
    }
    for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] > pools[c].size()) {
            throw SamplingError("class " + std::to_string(c) + " needs " +
                                std::to_string(counts[c]) + " demonstrations but only " +
                                std::to_string(pools[c].size()) + " are available");
        }
        rng.shuffle(std::span(pools[c]));
        for (std::size_t i = 0; i < counts[c]; ++i) out.push_back(dataset[pools[c][i]]);
    }
    rng.shuffle(std::span(out));
    return out;
}

std::vector<Demonstration> permute_demonstrations(std::vector<Demonstration> demos,
                                                  std::uint64_t seed) {
    Rng rng(seed);
    rng.shuffle(std::span(demos));
    return demos;
}

std::size_t utf8_length(const std::string& s) {
    return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char ch) {
        return (static_cast<unsigned char>(ch) & 0xC0u) != 0x80u;
    }));
}

TokenBudget estimate_token_budget(const Prompt& p, std::size_t max_tokens,
                                  std::optional<std::size_t> backend_count) {
    if (max_tokens == 0) throw ConfigError("max_tokens must be positive");
    const std::size_t estimate =
        backend_count ? *backend_count : (utf8_length(p.rendered_text) + 3) / 4;
    return {estimate, estimate <= max_tokens};
}

}  // namespace linc
