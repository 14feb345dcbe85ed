#include "noisesel/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace noisesel::io {
namespace {

using nlohmann::json;

std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s, std::size_t line_no) {
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        require(used == s.size(), ErrorKind::Validation, "");
        return v;
    } catch (...) {
        fail(ErrorKind::Validation, "line " + std::to_string(line_no) + ": bad number '" + s + "'");
    }
}

ClassIndex parse_label(const std::string& s, std::size_t line_no) {
    try {
        std::size_t used = 0;
        long long v = std::stoll(s, &used);
        require(used == s.size() && v >= 0, ErrorKind::Validation, "");
        return static_cast<ClassIndex>(v);
    } catch (...) {
        fail(ErrorKind::Validation, "line " + std::to_string(line_no) + ": bad class index '" + s + "'");
    }
}

json parse_json(const std::string& text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        fail(ErrorKind::Validation, std::string(what) + ": " + e.what());
    }
}

}  // namespace

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_dataset_csv(const LabeledDataset& ds, std::ostream& out) {
    out << "id,noisy_label,true_label";
    for (std::size_t j = 0; j < ds.dim(); ++j) out << ",f" << j;
    out << '\n';
    for (std::size_t i = 0; i < ds.size(); ++i) {
        out << i << ',' << ds.noisy_labels()[i] << ',';
        if (ds.has_true_labels()) out << ds.true_labels()[i];
        for (double v : ds.features().row(i)) out << ',' << format_double(v);
        out << '\n';
    }
}

LabeledDataset read_dataset_csv(std::istream& in, std::optional<std::size_t> num_classes) {
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), ErrorKind::Validation, "dataset CSV is empty");
    auto header = split_commas(line);
    require(header.size() >= 3 && header[0] == "id" && header[1] == "noisy_label" && header[2] == "true_label",
            ErrorKind::Validation, "dataset CSV header must start with id,noisy_label,true_label");
    const std::size_t d = header.size() - 3;
    for (std::size_t j = 0; j < d; ++j)
        require(header[3 + j] == "f" + std::to_string(j), ErrorKind::Validation,
                "dataset CSV: unexpected feature column '" + header[3 + j] + "'");

    std::vector<double> values;
    std::vector<ClassIndex> noisy, truth;
    std::size_t with_truth = 0, line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split_commas(line);
        require(fields.size() == d + 3, ErrorKind::Validation,
                "line " + std::to_string(line_no) + ": expected " + std::to_string(d + 3) + " fields");
        require(parse_label(fields[0], line_no) == noisy.size(), ErrorKind::Validation,
                "line " + std::to_string(line_no) + ": ids must be consecutive from 0");
        noisy.push_back(parse_label(fields[1], line_no));
        if (!fields[2].empty()) {
            truth.push_back(parse_label(fields[2], line_no));
            ++with_truth;
        }
        for (std::size_t j = 0; j < d; ++j) values.push_back(parse_double(fields[3 + j], line_no));
    }
    require(with_truth == 0 || with_truth == noisy.size(), ErrorKind::Validation,
            "dataset CSV: true_label must be present on all rows or none");

    std::size_t k = num_classes.value_or(0);
    if (!num_classes) {
        for (ClassIndex c : noisy) k = std::max<std::size_t>(k, c + 1);
        for (ClassIndex c : truth) k = std::max<std::size_t>(k, c + 1);
        k = std::max<std::size_t>(k, 2);
    }
    Matrix features(noisy.size(), d);
    std::copy(values.begin(), values.end(), features.data().begin());
    std::optional<std::vector<ClassIndex>> true_labels;
    if (with_truth > 0) true_labels = std::move(truth);
    return LabeledDataset(std::move(features), std::move(noisy), std::move(true_labels), k);
}

void save_dataset_csv(const LabeledDataset& ds, const std::filesystem::path& path) {
    std::ostringstream out;
    write_dataset_csv(ds, out);
    write_text(path, out.str());
}

LabeledDataset load_dataset_csv(const std::filesystem::path& path, std::optional<std::size_t> num_classes) {
    std::istringstream in(read_text(path));
    return read_dataset_csv(in, num_classes);
}

std::string knowledge_to_json(const NoiseKnowledge& knowledge) {
    json sources = json::object();
    for (const auto& [c, set] : knowledge.mapping()) sources[std::to_string(c)] = std::vector<ClassIndex>(set.begin(), set.end());
    json doc = {{"k", knowledge.num_classes()}, {"sources", sources}, {"origin", to_string(knowledge.origin())}};
    return doc.dump(2) + "\n";
}

NoiseKnowledge knowledge_from_json(const std::string& text) {
    json doc = parse_json(text, "knowledge JSON");
    try {
        const std::size_t k = doc.at("k").get<std::size_t>();
        std::map<ClassIndex, ClassSet> sources;
        for (const auto& [key, list] : doc.at("sources").items()) {
            std::size_t used = 0;
            const unsigned long c = std::stoul(key, &used);
            require(used == key.size(), ErrorKind::Validation, "knowledge JSON: bad class key '" + key + "'");
            for (const auto& s : list) sources[static_cast<ClassIndex>(c)].insert(s.get<ClassIndex>());
        }
        return NoiseKnowledge(k, std::move(sources), knowledge_origin_from_string(doc.at("origin").get<std::string>()));
    } catch (const json::exception& e) {
        fail(ErrorKind::Validation, std::string("knowledge JSON: ") + e.what());
    } catch (const std::invalid_argument&) {
        fail(ErrorKind::Validation, "knowledge JSON: class keys must be integers");
    }
}

void save_knowledge_json(const NoiseKnowledge& knowledge, const std::filesystem::path& path) {
    write_text(path, knowledge_to_json(knowledge));
}

NoiseKnowledge load_knowledge_json(const std::filesystem::path& path) {
    return knowledge_from_json(read_text(path));
}

std::string transition_to_json(const TransitionMatrix& t) {
    json rows = json::array();
    for (std::size_t i = 0; i < t.num_classes(); ++i) {
        auto r = t.matrix().row(i);
        rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    json doc = {{"k", t.num_classes()}, {"t", rows}};
    return doc.dump(2) + "\n";
}

TransitionMatrix transition_from_json(const std::string& text) {
    json doc = parse_json(text, "transition JSON");
    try {
        const std::size_t k = doc.at("k").get<std::size_t>();
        const auto& rows = doc.at("t");
        require(rows.size() == k, ErrorKind::Shape, "transition JSON: row count != k");
        Matrix m(k, k);
        for (std::size_t i = 0; i < k; ++i) {
            require(rows[i].size() == k, ErrorKind::Shape, "transition JSON: row length != k");
            for (std::size_t j = 0; j < k; ++j) m(i, j) = rows[i][j].get<double>();
        }
        return TransitionMatrix(std::move(m));
    } catch (const json::exception& e) {
        fail(ErrorKind::Validation, std::string("transition JSON: ") + e.what());
    }
}

void write_scores_csv(const CleanScores& scores, std::ostream& out) {
    out << "id,prob_clean,selected\n";
    for (std::size_t i = 0; i < scores.size(); ++i)
        out << i << ',' << format_double(scores.prob_clean()[i]) << ',' << (scores.selected()[i] ? 1 : 0) << '\n';
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::Io, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
    out << text;
    require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + path.string());
}

}  // namespace noisesel::io
