#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "linc/prompt.hpp"

namespace linc {

/// A prompt format together with the verbalizer of each class (index = class).
struct TaskTemplate {
    PromptTemplate format;
    std::vector<std::string> verbalizers;

    LabelSpace label_space(const std::vector<std::string>& display_names = {}) const {
        return LabelSpace::from_verbalizers(verbalizers, display_names);
    }
};

/// Names accepted by builtin_template: the six SST-2 formats "sst2-format1"
/// .. "sst2-format6", the per-dataset formats "sst2", "sst5", "agnews",
/// "trec", "dbpedia", "subj", "rte", and "openml" with `openml_classes`
/// numeric labels.
std::vector<std::string> builtin_template_names();
TaskTemplate builtin_template(const std::string& name, std::size_t openml_classes = 2);
std::vector<std::string> sst2_format_names();

/// JSON object with header, input_pattern, output_pattern, demo_separator,
/// query_suffix and verbalizers.
TaskTemplate load_template_file(const std::filesystem::path& path);

/// Built-in name, or a path to a template file.
TaskTemplate resolve_template(const std::string& name_or_path);

/// "x1=v1, x2=v2, ..." for the tabular template.
std::string format_tabular_row(const std::vector<std::string>& feature_values);

}  // namespace linc
