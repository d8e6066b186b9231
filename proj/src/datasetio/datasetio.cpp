#include "obf/datasetio.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "obf/frontend.hpp"
#include "obf/scopes.hpp"

namespace obf::datasetio {

namespace fs = std::filesystem;
using strategies::Tag;

std::string_view format_name(Format format) {
    switch (format) {
        case Format::ClassEvalJson: return "classeval_json";
        case Format::LcbJson: return "lcb_json";
        case Format::PlainDir: return "plain_dir";
    }
    return "plain_dir";
}

Format parse_format(std::string_view text) {
    for (auto f : {Format::ClassEvalJson, Format::LcbJson, Format::PlainDir}) {
        if (format_name(f) == text) return f;
    }
    throw Error("unknown corpus format: " + std::string(text));
}

namespace {

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw Error("cannot write " + path.string());
}

// JSON array, or one object per line.
std::vector<nlohmann::json> read_records(const std::string& path) {
    auto text = read_text(path);
    auto first = text.find_first_not_of(" \t\r\n");
    std::vector<nlohmann::json> records;
    if (first != std::string::npos && text[first] == '[') {
        nlohmann::json arr;
        try {
            arr = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(0, std::string("invalid JSON: ") + e.what());
        }
        for (auto& r : arr) records.push_back(std::move(r));
        return records;
    }
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            records.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(records.size(), std::string("invalid JSON: ") + e.what());
        }
    }
    return records;
}

std::string field(const nlohmann::json& r, std::size_t index, std::initializer_list<const char*> keys, bool required) {
    if (!r.is_object()) throw FormatError(index, "record is not an object");
    for (const char* key : keys) {
        if (!r.contains(key) || r[key].is_null()) continue;
        if (r[key].is_string()) return r[key].get<std::string>();
        if (r[key].is_number_integer()) return std::to_string(r[key].get<long long>());
        throw FormatError(index, std::string("field ") + key + " has the wrong type");
    }
    if (required) throw FormatError(index, std::string("missing field ") + *keys.begin());
    return "";
}

// Empty when the unit parses and analyzes, otherwise the reason.
std::string check_unit(const SourceUnit& unit) {
    try {
        auto tree = frontend::parse(unit.code);
        if (unit.test_code.empty()) {
            scopes::analyze(tree);
        } else {
            auto test = frontend::parse(unit.test_code);
            scopes::analyze(tree, &test);
        }
        return "";
    } catch (const SyntaxError& e) {
        return std::string("syntax error: ") + e.what();
    } catch (const AnalysisError& e) {
        return std::string("analysis error: ") + e.what();
    }
}

}  // namespace

IngestResult ingest(const std::string& path, Format format) {
    std::vector<SourceUnit> candidates;
    if (format == Format::PlainDir) {
        if (!fs::is_directory(path)) throw Error(path + " is not a directory");
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(path)) {
            if (e.is_regular_file() && e.path().extension() == ".py") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            auto stem = f.stem().string();
            if (stem.size() > 5 && stem.compare(stem.size() - 5, 5, "_test") == 0) continue;
            auto test = f.parent_path() / (stem + "_test.py");
            candidates.push_back({stem, read_text(f), fs::exists(test) ? read_text(test) : "", "custom"});
        }
    } else {
        auto records = read_records(path);
        for (std::size_t i = 0; i < records.size(); ++i) {
            const auto& r = records[i];
            if (format == Format::ClassEvalJson) {
                candidates.push_back({field(r, i, {"task_id"}, true), field(r, i, {"solution_code"}, true),
                                      field(r, i, {"test"}, false), "classeval"});
            } else {
                candidates.push_back({field(r, i, {"question_id", "task_id", "id"}, true),
                                      field(r, i, {"code"}, true), field(r, i, {"test", "test_code"}, false),
                                      "livecodebench"});
            }
            if (candidates.back().task_id.empty()) throw FormatError(i, "empty task id");
        }
    }
    IngestResult result;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        auto& unit = candidates[i];
        if (!seen.insert(unit.task_id).second) throw FormatError(i, "duplicate task id " + unit.task_id);
        auto problem = check_unit(unit);
        if (!problem.empty()) {
            ++result.warnings;
            result.messages.push_back(unit.task_id + ": " + problem);
            continue;
        }
        result.units.push_back(std::move(unit));
    }
    return result;
}

nlohmann::json to_json(const DatasetManifest& manifest) {
    nlohmann::json records = nlohmann::json::array();
    for (const auto& e : manifest.records) {
        nlohmann::json verdicts = nlohmann::json::object();
        for (const auto& [tag, status] : e.verdicts) verdicts[std::string(tag_name(tag))] = status_name(status);
        nlohmann::json tags = nlohmann::json::array();
        for (auto tag : e.strategies) tags.push_back(tag_name(tag));
        records.push_back(
            {{"task_id", e.task_id}, {"origin", e.origin}, {"cc", e.cc}, {"verdicts", verdicts}, {"strategies", tags}});
    }
    return {{"schema_version", manifest.schema_version},
            {"seed", manifest.seed},
            {"lexicon_versions", manifest.lexicon_versions},
            {"records", records}};
}

std::string manifest_path(const std::string& dataset_path) {
    fs::path p(dataset_path);
    return (p.parent_path() / (p.stem().string() + ".manifest.json")).string();
}

DatasetManifest emit_dataset(const std::vector<ObfuscationRecord>& records, const std::string& out_path) {
    std::vector<const ObfuscationRecord*> ordered;
    for (const auto& r : records) ordered.push_back(&r);
    std::sort(ordered.begin(), ordered.end(), [](const auto* a, const auto* b) { return a->task_id < b->task_id; });

    DatasetManifest manifest;
    if (!ordered.empty()) manifest.seed = ordered.front()->seed;
    std::string lines;
    for (const auto* r : ordered) {
        if (r->seed != manifest.seed) throw Error("records were built with different seeds");
        for (auto tag : strategies::kAllTags) {
            auto v = r->verdicts.find(tag);
            if (!r->variants.count(tag)) {
                throw UnverifiedRecord(r->task_id + ": missing " + std::string(tag_name(tag)) + " variant");
            }
            if (v == r->verdicts.end() || v->second.status != VerdictStatus::Equivalent) {
                std::string status = v == r->verdicts.end() ? "unverified" : std::string(status_name(v->second.status));
                throw UnverifiedRecord(r->task_id + ": " + std::string(tag_name(tag)) + " variant is " + status);
            }
        }
        ManifestEntry entry{r->task_id, r->original.origin,
                            metrics::cyclomatic(frontend::parse(r->original.code)).unit_cc_max, {}, {}};
        nlohmann::json variants = nlohmann::json::object();
        for (const auto& [tag, variant] : r->variants) {
            variants[std::string(tag_name(tag))] = {
                {"code", variant.code}, {"test", variant.test_code}, {"name_map", strategies::to_json(variant.map)}};
            entry.verdicts[tag] = r->verdicts.at(tag).status;
            entry.strategies.push_back(tag);
            if (!variant.map.strategy.lexicon_version.empty()) {
                manifest.lexicon_versions[std::string(tag_name(tag))] = variant.map.strategy.lexicon_version;
            }
        }
        nlohmann::json line = {{"task_id", r->task_id},
                               {"origin", r->original.origin},
                               {"original_code", r->original.code},
                               {"original_test", r->original.test_code},
                               {"variants", variants},
                               {"cc", entry.cc},
                               {"seed", r->seed}};
        lines += line.dump() + "\n";
        manifest.records.push_back(std::move(entry));
    }
    write_text(out_path, lines);
    write_text(manifest_path(out_path), to_json(manifest).dump(2) + "\n");
    return manifest;
}

std::vector<ObfuscationRecord> read_dataset(const std::string& path) {
    auto manifest = nlohmann::json::parse(read_text(manifest_path(path)));
    if (manifest.value("schema_version", 0) != kSchemaVersion) throw Error("unsupported dataset schema");
    std::map<std::string, nlohmann::json> verdicts;
    for (const auto& e : manifest.at("records")) verdicts[e.at("task_id").get<std::string>()] = e.at("verdicts");

    std::vector<ObfuscationRecord> out;
    auto records = read_records(path);
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& j = records[i];
        try {
            ObfuscationRecord r;
            r.task_id = j.at("task_id").get<std::string>();
            r.seed = j.at("seed").get<std::uint64_t>();
            r.original = {r.task_id, j.at("original_code").get<std::string>(), j.at("original_test").get<std::string>(),
                          j.value("origin", std::string())};
            for (const auto& [name, v] : j.at("variants").items()) {
                auto tag = strategies::parse_tag(name);
                r.variants[tag] = {v.at("code").get<std::string>(), v.at("test").get<std::string>(),
                                   strategies::name_map_from_json(v.at("name_map"))};
            }
            auto it = verdicts.find(r.task_id);
            if (it == verdicts.end()) throw FormatError(i, "record missing from the manifest");
            for (const auto& [name, status] : it->second.items()) {
                r.verdicts[strategies::parse_tag(name)].status = parse_status(status.get<std::string>());
            }
            out.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(i, e.what());
        }
    }
    return out;
}

BuildReport build_dataset(const std::vector<SourceUnit>& units, const BuildOptions& options, verify::Runner& runner,
                          const std::string& out_path) {
    BuildReport report;
    auto kept = metrics::filter_corpus(units, options.cc_threshold, options.aggregate);
    std::set<std::string> kept_ids;
    for (const auto& u : kept) kept_ids.insert(u.task_id);
    for (const auto& u : units) {
        if (!kept_ids.count(u.task_id)) report.excluded.push_back(u.task_id + ": below complexity threshold");
    }
    std::vector<ObfuscationRecord> records;
    for (const auto& u : kept) records.push_back(rewrite::obfuscate_all(u, options.seed, options.pipeline));
    report.summary = verify::verify_corpus(records, options.limits, runner, options.workers);

    std::vector<ObfuscationRecord> admitted;
    for (auto& r : records) {
        bool ok = !r.partial() && r.variants.size() == strategies::kAllTags.size();
        for (const auto& [tag, v] : r.verdicts) ok = ok && v.status == VerdictStatus::Equivalent;
        if (ok) {
            admitted.push_back(std::move(r));
        } else {
            report.excluded.push_back(r.task_id + ": not verified equivalent for every strategy");
        }
    }
    report.manifest = emit_dataset(admitted, out_path);
    return report;
}

}  // namespace obf::datasetio
