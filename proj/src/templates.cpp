#include "linc/templates.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "linc/error.hpp"

namespace linc {

namespace {

using json = nlohmann::json;

TaskTemplate make(std::string name, std::string header, std::string input_pattern,
                  std::string output_pattern, std::string query_suffix,
                  std::vector<std::string> verbalizers, std::string sep = "\n\n") {
    TaskTemplate t{PromptTemplate{std::move(name), std::move(header), std::move(input_pattern),
                                  std::move(output_pattern), std::move(sep),
                                  std::move(query_suffix)},
                   std::move(verbalizers)};
    t.format.validate();
    return t;
}

std::vector<std::string> sentiment() { return {"Negative", "Positive"}; }
std::vector<std::string> good_bad() { return {"bad", "good"}; }

}  // namespace

std::vector<std::string> sst2_format_names() {
    return {"sst2-format1", "sst2-format2", "sst2-format3",
            "sst2-format4", "sst2-format5", "sst2-format6"};
}

std::vector<std::string> builtin_template_names() {
    auto names = sst2_format_names();
    for (const char* n : {"sst2", "sst5", "agnews", "trec", "dbpedia", "subj", "rte", "openml"}) {
        names.emplace_back(n);
    }
    return names;
}

TaskTemplate builtin_template(const std::string& name, std::size_t openml_classes) {
    if (name == "sst2-format1" || name == "sst2") {
        return make(name, "", "Review: {input}\n", "Sentiment: {label}", "Sentiment:", sentiment());
    }
    if (name == "sst2-format2") {
        return make(name, "", "Input: {input}\n", "Prediction: {label}", "Prediction:", sentiment());
    }
    if (name == "sst2-format3") {
        return make(name, "", "Review: {input}\n", "Sentiment: {label}", "Sentiment:", good_bad());
    }
    if (name == "sst2-format4") {
        return make(name, "", "Input: {input}\n", "Prediction: {label}", "Prediction:", good_bad());
    }
    if (name == "sst2-format5") {
        return make(name, "", "{input} My overall feeling was that the movie was", " {label}", "",
                    good_bad());
    }
    if (name == "sst2-format6") {
        return make(name, "",
                    "Review: {input}\nQuestion: Is the sentiment of the above review Positive or "
                    "Negative?\n",
                    "Answer: {label}", "Answer:", sentiment());
    }
    if (name == "sst5") {
        return make(name, "", "Review: {input}\n", "Sentiment: {label}", "Sentiment:",
                    {"terrible", "bad", "okay", "good", "great"});
    }
    if (name == "agnews") {
        return make(name,
                    "Classify the news articles into the categories of World, Sports, Business, "
                    "and Technology.\n\n",
                    "Article: {input}\n", "Answer: {label}", "Answer:",
                    {"World", "Sports", "Business", "Technology"});
    }
    if (name == "trec") {
        return make(name,
                    "Classify the questions based on whether their answer type is a Number, "
                    "Location, Person, Description, Entity, or Abbreviation.\n\n",
                    "Question: {input}\n", "Answer Type: {label}", "Answer Type:",
                    {"Number", "Location", "Person", "Description", "Entity", "Abbreviation"});
    }
    if (name == "dbpedia") {
        return make(name,
                    "Classify the documents based on whether they are about a Company, School, "
                    "Artist, Athlete, Politician, Transportation, Building, Nature, Village, "
                    "Animal, Plant, Album, Film, or Book.\n\n",
                    "Article: {input}\n", "Answer: {label}", "Answer:",
                    {"Company", "School", "Artist", "Athlete", "Politician", "Transportation",
                     "Building", "Nature", "Village", "Animal", "Plant", "Album", "Film", "Book"});
    }
    if (name == "subj") {
        return make(name, "", "Input: {input}\n", "Type: {label}", "Type:",
                    {"objective", "subjective"});
    }
    if (name == "rte") {
        return make(name, "", "{premise}\nquestion: {hypothesis} True or False?\n",
                    "answer: {label}", "answer:", {"True", "False"});
    }
    if (name == "openml") {
        std::vector<std::string> labels;
        for (std::size_t c = 0; c < openml_classes; ++c) labels.push_back(std::to_string(c));
        return make(name, "", "When we have {input}, what should be y? ### ", "y={label} @@@",
                    "y=", std::move(labels), "\n");
    }
    throw TemplateError("unknown built-in template '" + name + "'");
}

TaskTemplate load_template_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open template file " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw TemplateError("template file " + path.string() + ": " + e.what());
    }
    static const std::set<std::string> allowed = {"name",           "header",
                                                  "input_pattern",  "output_pattern",
                                                  "demo_separator", "query_suffix",
                                                  "verbalizers"};
    if (!j.is_object()) throw TemplateError("template file must hold a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (!allowed.contains(key)) {
            throw TemplateError("template file " + path.string() + ": unknown key '" + key + "'");
        }
    }
    try {
        TaskTemplate t;
        t.format.name = j.value("name", path.stem().string());
        t.format.header = j.value("header", "");
        t.format.input_pattern = j.at("input_pattern").get<std::string>();
        t.format.output_pattern = j.at("output_pattern").get<std::string>();
        t.format.demo_separator = j.value("demo_separator", "\n\n");
        t.format.query_suffix = j.value("query_suffix", "");
        t.verbalizers = j.at("verbalizers").get<std::vector<std::string>>();
        t.format.validate();
        return t;
    } catch (const json::exception& e) {
        throw TemplateError("template file " + path.string() + ": " + e.what());
    }
}

TaskTemplate resolve_template(const std::string& name_or_path) {
    const auto names = builtin_template_names();
    if (std::find(names.begin(), names.end(), name_or_path) != names.end()) {
        return builtin_template(name_or_path);
    }
    if (name_or_path.starts_with("openml:")) {
        return builtin_template("openml", std::stoul(name_or_path.substr(7)));
    }
    return load_template_file(name_or_path);
}

std::string format_tabular_row(const std::vector<std::string>& feature_values) {
    std::string out;
    for (std::size_t i = 0; i < feature_values.size(); ++i) {
        if (i) out += ", ";
        out += "x" + std::to_string(i + 1) + "=" + feature_values[i];
    }
    return out;
}

}  // namespace linc
