#include "obf/eval.hpp"

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <regex>
#include <sstream>
#include <thread>

#include "obf/rewrite.hpp"
#include "obf/tokenizer.hpp"

namespace obf::eval {

// ---- scoring ---------------------------------------------------------------------------

double pass_at_k(int n, int c, int k) {
    if (n < 1 || c < 0 || c > n || k < 1 || k > n) {
        throw DomainError("pass_at_k needs 0 <= c <= n and 1 <= k <= n (n=" + std::to_string(n) +
                          ", c=" + std::to_string(c) + ", k=" + std::to_string(k) + ")");
    }
    if (n - c < k) return 1.0;
    // C(n-c, k) / C(n, k) as a product of ratios.
    double miss = 1.0;
    for (int i = n - c + 1; i <= n; ++i) miss *= 1.0 - static_cast<double>(k) / i;
    return 1.0 - miss;
}

double judge_score(const std::array<double, 5>& dimensions) {
    double sum = 0;
    for (double d : dimensions) {
        if (!(d >= 1 && d <= 5)) throw DomainError("judge rating out of [1, 5]: " + std::to_string(d));
        sum += d;
    }
    return (sum / 5 - 1) / 4 * 100;
}

double judge_aggregate(const std::vector<std::array<double, 5>>& ratings) {
    if (ratings.empty()) throw DomainError("no judge ratings");
    double total = 0;
    for (const auto& r : ratings) total += judge_score(r);
    return total / static_cast<double>(ratings.size());
}

DeltaSummary delta_report(const ScoreSlice& orig, const std::map<std::string, ScoreSlice>& variants) {
    auto sorted = [](std::vector<std::string> ids) {
        std::sort(ids.begin(), ids.end());
        return ids;
    };
    auto base = sorted(orig.task_ids);
    DeltaSummary d;
    for (const auto& [name, slice] : variants) {
        if (sorted(slice.task_ids) != base) throw MismatchedTaskSets("strategy " + name + " covers a different task set");
        d.per_strategy[name] = orig.score - slice.score;
    }
    if (d.per_strategy.empty()) return d;
    d.min = d.max = d.per_strategy.begin()->second;
    double sum = 0;
    for (const auto& [name, delta] : d.per_strategy) {
        d.min = std::min(d.min, delta);
        d.max = std::max(d.max, delta);
        sum += delta;
    }
    d.avg = sum / static_cast<double>(d.per_strategy.size());
    return d;
}

// ---- tasks -----------------------------------------------------------------------------

std::string_view domain_name(DomainSize size) { return size == DomainSize::SmallFinite ? "small_finite" : "large"; }

DomainSize parse_domain(std::string_view text) {
    if (text == "small_finite") return DomainSize::SmallFinite;
    if (text == "large") return DomainSize::Large;
    throw DomainError("unknown output domain: " + std::string(text));
}

void validate(const PredictionTask& task) {
    if (task.expected_output.empty()) throw DomainError(task.task_id + ": empty expected output");
    if (task.old_output && canonicalize(*task.old_output) == canonicalize(task.expected_output)) {
        throw DomainError(task.task_id + ": old output equals the expected output");
    }
}

std::vector<PredictionSpec> load_specs(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path);
    std::vector<PredictionSpec> specs;
    std::string line;
    for (std::size_t index = 0; std::getline(in, line);) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(index, e.what());
        }
        auto text = [&](const char* key) {
            if (!j.contains(key) || !j[key].is_string()) throw FormatError(index, std::string("missing ") + key);
            return j[key].get<std::string>();
        };
        auto optional_text = [&](const char* key) -> std::optional<std::string> {
            if (!j.contains(key) || j[key].is_null()) return std::nullopt;
            return text(key);
        };
        PredictionSpec s;
        s.task_id = text("task_id");
        s.code = text("code");
        s.function = text("function");
        s.input = text("input");
        s.expected_output = optional_text("expected_output");
        s.old_output = optional_text("old_output");
        try {
            s.domain = parse_domain(optional_text("output_domain").value_or("large"));
        } catch (const DomainError& e) {
            throw FormatError(index, e.what());
        }
        specs.push_back(std::move(s));
        ++index;
    }
    return specs;
}

std::string render_prompt(const std::string& templ, const std::string& code, const std::string& input) {
    std::string out;
    for (std::size_t i = 0; i < templ.size();) {
        if (templ.compare(i, 8, "{{code}}") == 0) {
            out += code;
            i += 8;
        } else if (templ.compare(i, 9, "{{input}}") == 0) {
            out += input;
            i += 9;
        } else {
            out += templ[i++];
        }
    }
    return out;
}

const std::string& default_template() {
    static const std::string templ =
        "You are given a Python program and a function call.\n"
        "Predict the exact value the call returns, as a Python literal.\n\n"
        "```python\n{{code}}```\n\n"
        "Call: {{input}}\n\n"
        "Reply with the value inside a fenced block labelled ANSWER, for example:\n"
        "```ANSWER\n[1, 2]\n```\n";
    return templ;
}

void ground_truth(std::vector<PredictionSpec>& specs, verify::Runner& runner, const verify::Limits& limits) {
    for (auto& s : specs) {
        if (s.expected_output) continue;
        auto r = runner.run(verify::Job{s.code, "", limits.timeout_s, verify::CallSpec{s.function, s.input}}, limits);
        if (r.status != "ok" || !r.returned_value) {
            throw Error(s.task_id + ": ground-truth call " + r.status + ": " + r.stderr_tail);
        }
        s.expected_output = *r.returned_value;
    }
}

std::vector<PredictionTask> tasks_for(const PredictionSpec& spec, const ObfuscationRecord& record,
                                      const std::vector<std::string>& conditions, const std::string& templ) {
    if (!spec.expected_output) throw Error(spec.task_id + ": expected output not computed");
    std::vector<PredictionTask> out;
    for (const auto& name : conditions) {
        PredictionTask t{spec.task_id, name, "", *spec.expected_output, spec.old_output, spec.domain};
        if (name == kOriginal) {
            auto canonical = rewrite::obfuscate(record.original, strategies::NameMap{});
            t.prompt = render_prompt(templ, canonical.code, spec.function + "(" + spec.input + ")");
        } else {
            auto tag = strategies::parse_tag(name);
            auto it = record.variants.find(tag);
            if (it == record.variants.end()) throw Error(spec.task_id + ": no " + name + " variant");
            std::string function = spec.function;
            for (const auto& e : it->second.map.entries) {
                if (e.from == spec.function && e.scope == "<module>") function = e.to;
            }
            t.prompt = render_prompt(templ, it->second.code, function + "(" + spec.input + ")");
        }
        validate(t);
        out.push_back(std::move(t));
    }
    return out;
}

// ---- answers ---------------------------------------------------------------------------

std::optional<std::string> extract_answer(const std::string& response) {
    for (std::size_t pos = response.find("```"); pos != std::string::npos; pos = response.find("```", pos + 3)) {
        std::size_t i = pos + 3;
        while (i < response.size() && (response[i] == ' ' || response[i] == '\t')) ++i;
        std::string label;
        while (i < response.size() && std::isalpha(static_cast<unsigned char>(response[i]))) {
            label += static_cast<char>(std::toupper(static_cast<unsigned char>(response[i++])));
        }
        if (label != "ANSWER") continue;
        auto eol = response.find('\n', i);
        if (eol == std::string::npos) return std::nullopt;
        if (response.find_first_not_of(" \t\r", i) < eol) continue;
        auto close = response.find("```", eol + 1);
        if (close == std::string::npos) return std::nullopt;
        return response.substr(eol + 1, close - eol - 1);
    }
    return std::nullopt;
}

namespace {

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

// Decodes a plain (or u-prefixed) string literal; nullopt for other prefixes.
std::optional<std::string> decode_string(std::string_view tok) {
    std::size_t p = 0;
    if (!tok.empty() && (tok[0] == 'u' || tok[0] == 'U')) p = 1;
    if (p >= tok.size() || (tok[p] != '\'' && tok[p] != '"')) return std::nullopt;
    std::size_t q = tok.compare(p, 3, std::string(3, tok[p])) == 0 && tok.size() - p >= 6 ? 3 : 1;
    std::string_view body = tok.substr(p + q, tok.size() - p - 2 * q);
    std::string out;
    for (std::size_t i = 0; i < body.size(); ++i) {
        if (body[i] != '\\' || i + 1 == body.size()) {
            out += body[i];
            continue;
        }
        char e = body[++i];
        auto hex = [&](std::size_t digits) -> std::optional<std::uint32_t> {
            std::uint32_t v = 0;
            for (std::size_t d = 1; d <= digits; ++d) {
                if (i + d >= body.size() || !std::isxdigit(static_cast<unsigned char>(body[i + d]))) return std::nullopt;
                v = v * 16 + static_cast<std::uint32_t>(std::stoi(std::string(1, body[i + d]), nullptr, 16));
            }
            i += digits;
            return v;
        };
        switch (e) {
            case '\n': break;
            case '\\': out += '\\'; break;
            case '\'': out += '\''; break;
            case '"': out += '"'; break;
            case 'n': out += '\n'; break;
            case 't': out += '\t'; break;
            case 'r': out += '\r'; break;
            case 'a': out += '\a'; break;
            case 'b': out += '\b'; break;
            case 'f': out += '\f'; break;
            case 'v': out += '\v'; break;
            case '0': out += '\0'; break;
            case 'x':
            case 'u':
            case 'U': {
                auto v = hex(e == 'x' ? 2 : e == 'u' ? 4 : 8);
                if (!v) return std::nullopt;
                append_utf8(out, *v);
                break;
            }
            default:
                out += '\\';
                out += e;
        }
    }
    return out;
}

std::string repr_string(const std::string& value) {
    char quote = value.find('\'') != std::string::npos && value.find('"') == std::string::npos ? '"' : '\'';
    std::string out(1, quote);
    for (unsigned char c : value) {
        if (c == '\\') {
            out += "\\\\";
        } else if (c == static_cast<unsigned char>(quote)) {
            out += '\\';
            out += static_cast<char>(c);
        } else if (c == '\n') {
            out += "\\n";
        } else if (c == '\t') {
            out += "\\t";
        } else if (c == '\r') {
            out += "\\r";
        } else if (c < 0x20 || c == 0x7f) {
            static const char* digits = "0123456789abcdef";
            out += "\\x";
            out += digits[c >> 4];
            out += digits[c & 15];
        } else {
            out += static_cast<char>(c);
        }
    }
    out += quote;
    return out;
}

// Python's repr of a float literal: shortest round-trip digits, exponent outside [-4, 16).
std::optional<std::string> repr_float(std::string_view tok) {
    std::string clean;
    for (char c : tok) {
        if (c != '_') clean += c;
    }
    if (clean.find_first_of("xXoObBjJ") != std::string::npos) return std::nullopt;
    if (clean.find_first_of(".eE") == std::string::npos) return std::nullopt;
    double v = std::strtod(clean.c_str(), nullptr);
    if (!std::isfinite(v)) return std::nullopt;
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::scientific);
    std::string sci(buf, res.ptr);
    auto e = sci.find('e');
    std::string digits;
    for (char c : sci.substr(0, e)) {
        if (std::isdigit(static_cast<unsigned char>(c))) digits += c;
    }
    int exp = std::stoi(sci.substr(e + 1));
    if (exp >= -4 && exp < 16) {
        std::string out;
        if (exp < 0) {
            out = "0." + std::string(static_cast<std::size_t>(-exp - 1), '0') + digits;
        } else if (static_cast<int>(digits.size()) <= exp + 1) {
            out = digits + std::string(static_cast<std::size_t>(exp + 1 - static_cast<int>(digits.size())), '0') + ".0";
        } else {
            out = digits.substr(0, exp + 1) + "." + digits.substr(exp + 1);
        }
        return out;
    }
    std::string mant = digits.substr(0, 1);
    if (digits.size() > 1) mant += "." + digits.substr(1);
    std::string ex = std::to_string(std::abs(exp));
    if (ex.size() < 2) ex = "0" + ex;
    return mant + "e" + (exp < 0 ? "-" : "+") + ex;
}

std::string collapse_whitespace(const std::string& text) {
    std::string out;
    bool gap = false;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            gap = !out.empty();
        } else {
            if (gap) out += ' ';
            gap = false;
            out += c;
        }
    }
    return out;
}

}  // namespace

std::string canonicalize(const std::string& text) {
    std::vector<frontend::Token> tokens;
    try {
        frontend::TokenizeOptions opts;
        opts.bracketed = true;
        tokens = frontend::tokenize(text, opts).tokens;
    } catch (const Error&) {
        return collapse_whitespace(text);
    }
    std::string out;
    bool prev_word = false;
    std::string_view prev_op;
    for (const auto& t : tokens) {
        if (t.kind != frontend::TokenKind::Name && t.kind != frontend::TokenKind::Number &&
            t.kind != frontend::TokenKind::String && t.kind != frontend::TokenKind::Op) {
            continue;
        }
        bool word = t.kind != frontend::TokenKind::Op;
        bool closing = t.text == ")" || t.text == "]" || t.text == "}";
        if ((prev_word && word) || ((prev_op == "," || prev_op == ":") && !closing)) out += ' ';
        if (t.kind == frontend::TokenKind::String) {
            auto decoded = decode_string(t.text);
            out += decoded ? repr_string(*decoded) : std::string(t.text);
        } else if (t.kind == frontend::TokenKind::Number) {
            auto f = repr_float(t.text);
            out += f ? *f : std::string(t.text);
        } else {
            out += t.text;
        }
        prev_word = word;
        prev_op = word ? std::string_view{} : t.text;
    }
    return out;
}

// ---- endpoints -------------------------------------------------------------------------

EndpointConfig endpoint_from_env() {
    auto get = [](const char* name) {
        const char* v = std::getenv(name);
        return std::string(v ? v : "");
    };
    EndpointConfig c{get("OBF_BASE_URL"), get("OBF_API_KEY"), get("OBF_MODEL")};
    if (c.base_url.empty()) throw EndpointError("OBF_BASE_URL is not set");
    if (c.model.empty()) throw EndpointError("OBF_MODEL is not set");
    return c;
}

HttpChatClient::HttpChatClient(EndpointConfig config) : config_(std::move(config)) {
    static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(config_.base_url, m, url)) throw EndpointError("bad base URL: " + config_.base_url);
    origin_ = m[1];
    path_ = m[2];
    while (!path_.empty() && path_.back() == '/') path_.pop_back();
    path_ += "/chat/completions";
}

std::string HttpChatClient::complete(const ChatRequest& request) {
    httplib::Client client(origin_);
    auto seconds = static_cast<time_t>(config_.timeout_s);
    client.set_connection_timeout(seconds);
    client.set_read_timeout(seconds);
    client.set_write_timeout(seconds);
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
    nlohmann::json body = {{"model", config_.model},
                           {"temperature", config_.temperature},
                           {"messages", {{{"role", "user"}, {"content", request.prompt}}}}};
    auto res = client.Post(path_, headers, body.dump(), "application/json");
    if (!res) throw EndpointError("request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) {
        throw EndpointError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 300));
    }
    try {
        auto j = nlohmann::json::parse(res->body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw EndpointError(std::string("malformed completion: ") + e.what());
    }
}

ReplayClient::ReplayClient(nlohmann::json fixture) {
    if (!fixture.is_object() || !fixture.contains("responses") || !fixture["responses"].is_object()) {
        throw Error("replay fixture needs a \"responses\" object");
    }
    for (const auto& [key, value] : fixture["responses"].items()) responses_[key] = value.get<std::string>();
}

ReplayClient ReplayClient::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path);
    try {
        return ReplayClient(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw Error(path + ": " + e.what());
    }
}

std::string ReplayClient::complete(const ChatRequest& request) {
    auto it = responses_.find(request.key());
    if (it == responses_.end()) throw EndpointError("no recorded response for " + request.key());
    return it->second;
}

std::string RecordingClient::complete(const ChatRequest& request) {
    auto text = inner_.complete(request);
    std::lock_guard lock(mutex_);
    responses_[request.key()] = text;
    return text;
}

nlohmann::json RecordingClient::fixture() const {
    std::lock_guard lock(mutex_);
    return {{"responses", responses_}};
}

void RecordingClient::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    out << fixture().dump(2) << '\n';
    if (!out) throw Error("cannot write " + path);
}

// ---- runs ------------------------------------------------------------------------------

int TaskResult::correct() const {
    return static_cast<int>(std::count_if(samples.begin(), samples.end(), [](const Sample& s) { return s.correct; }));
}

RunResult run_prediction(const std::vector<PredictionTask>& tasks, ChatClient& client, const RunOptions& options) {
    if (options.n < 1) throw DomainError("n must be at least 1");
    RunResult result;
    result.n = options.n;
    for (const auto& t : tasks) {
        validate(t);
        result.tasks.push_back({t, std::vector<Sample>(options.n), ""});
    }
    std::stable_sort(result.tasks.begin(), result.tasks.end(), [](const TaskResult& a, const TaskResult& b) {
        return std::tie(a.task.strategy, a.task.task_id) < std::tie(b.task.strategy, b.task.task_id);
    });

    std::size_t jobs = result.tasks.size() * static_cast<std::size_t>(options.n);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t j; (j = next.fetch_add(1)) < jobs;) {
            auto& task = result.tasks[j / options.n];
            int index = static_cast<int>(j % options.n);
            Sample& sample = task.samples[index];
            ChatRequest req{task.task.task_id, task.task.strategy, index, task.task.prompt};
            auto delay = options.backoff;
            for (int attempt = 1;; ++attempt) {
                try {
                    auto answer = extract_answer(client.complete(req));
                    if (answer) sample.answer = canonicalize(*answer);
                    sample.error.clear();
                    break;
                } catch (const EndpointError& e) {
                    sample.error = e.what();
                    if (attempt >= options.max_attempts) break;
                    std::this_thread::sleep_for(delay);
                    delay *= 2;
                }
            }
            if (sample.answer) {
                sample.correct = *sample.answer == canonicalize(task.task.expected_output);
                sample.matches_old = task.task.old_output && *sample.answer == canonicalize(*task.task.old_output);
            }
        }
    };
    int workers = std::max(1, std::min<int>(options.concurrency, static_cast<int>(jobs)));
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();

    for (auto& task : result.tasks) {
        for (const auto& s : task.samples) {
            if (!s.error.empty()) {
                task.error = s.error;
                break;
            }
        }
    }
    return result;
}

std::map<std::string, int> memorization_check(const RunResult& result) {
    std::map<std::string, int> counts;
    for (const auto& t : result.tasks) {
        counts.emplace(t.task.strategy, 0);
        if (!t.task.old_output || t.task.domain == DomainSize::SmallFinite) continue;
        if (std::any_of(t.samples.begin(), t.samples.end(), [](const Sample& s) { return s.matches_old; })) {
            ++counts[t.task.strategy];
        }
    }
    return counts;
}

ScoreSlice score_slice(const RunResult& result, const std::string& strategy, int k) {
    ScoreSlice slice;
    double total = 0;
    for (const auto& t : result.tasks) {
        if (t.task.strategy != strategy) continue;
        slice.task_ids.push_back(t.task.task_id);
        total += pass_at_k(result.n, t.correct(), k);
    }
    if (!slice.task_ids.empty()) slice.score = total / static_cast<double>(slice.task_ids.size()) * 100;
    return slice;
}

EvalReport make_report(const RunResult& result) {
    EvalReport report;
    report.n = result.n;
    auto memo = memorization_check(result);
    for (const auto& t : result.tasks) {
        auto& s = report.strategies[t.task.strategy];
        ++s.tasks;
        if (!t.error.empty()) ++s.failed_tasks;
    }
    for (auto& [name, s] : report.strategies) {
        s.pass1 = score_slice(result, name, 1).score;
        if (result.n >= 3) s.pass3 = score_slice(result, name, 3).score;
        s.memorization = memo[name];
    }
    if (report.strategies.count(kOriginal) && report.strategies.size() > 1) {
        for (int k : {1, 3}) {
            if (k > result.n) continue;
            std::map<std::string, ScoreSlice> variants;
            for (const auto& [name, s] : report.strategies) {
                if (name != kOriginal) variants[name] = score_slice(result, name, k);
            }
            (k == 1 ? report.delta_pass1 : report.delta_pass3) =
                delta_report(score_slice(result, kOriginal, k), variants);
        }
    }
    return report;
}

namespace {

nlohmann::json delta_json(const DeltaSummary& d) {
    return {{"per_strategy", d.per_strategy}, {"min", d.min}, {"max", d.max}, {"avg", d.avg}};
}

}  // namespace

nlohmann::json to_json(const EvalReport& report) {
    nlohmann::json strategies = nlohmann::json::object();
    for (const auto& [name, s] : report.strategies) {
        strategies[name] = {{"tasks", s.tasks},
                            {"pass@1", s.pass1},
                            {"pass@3", s.pass3 ? nlohmann::json(*s.pass3) : nlohmann::json(nullptr)},
                            {"memorization", s.memorization},
                            {"failed_tasks", s.failed_tasks}};
    }
    nlohmann::json delta = nlohmann::json::object();
    if (report.delta_pass1) delta["pass@1"] = delta_json(*report.delta_pass1);
    if (report.delta_pass3) delta["pass@3"] = delta_json(*report.delta_pass3);
    return {{"n", report.n}, {"strategies", strategies}, {"delta", delta}};
}

std::string to_csv(const EvalReport& report) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(4);
    out << "strategy,tasks,pass@1,pass@3,memorization,failed_tasks,delta_pass@1,delta_pass@3\n";
    auto delta = [&](const std::optional<DeltaSummary>& d, const std::string& name) {
        if (!d || !d->per_strategy.count(name)) return std::string();
        std::ostringstream v;
        v << std::fixed << std::setprecision(4) << d->per_strategy.at(name);
        return v.str();
    };
    for (const auto& [name, s] : report.strategies) {
        out << name << ',' << s.tasks << ',' << s.pass1 << ',';
        if (s.pass3) out << *s.pass3;
        out << ',' << s.memorization << ',' << s.failed_tasks << ',' << delta(report.delta_pass1, name) << ','
            << delta(report.delta_pass3, name) << '\n';
    }
    return out.str();
}

}  // namespace obf::eval
