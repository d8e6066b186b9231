#include "obf/verify.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <set>
#include <sstream>
#include <thread>

#include "obf/frontend.hpp"
#include "obf/scopes.hpp"

namespace obf::verify {

using strategies::Tag;

// ---- protocol ------------------------------------------------------------------------

nlohmann::json job_to_json(const Job& job) {
    nlohmann::json j = {{"schema_version", kSchemaVersion}, {"code", job.code}, {"timeout_s", job.timeout_s}};
    if (job.call) {
        j["entry"] = "function_call";
        j["call_spec"] = {{"function", job.call->function}, {"args", job.call->args}};
    } else {
        j["entry"] = "unittest_module";
        j["test_code"] = job.test_code;
    }
    return j;
}

JobResult parse_result(const std::string& line, bool function_call) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("result is not JSON: ") + e.what());
    }
    auto need = [&](bool ok, const std::string& what) {
        if (!ok) throw ProtocolError("malformed result: " + what);
    };
    need(j.is_object(), "not an object");
    need(j.contains("schema_version") && j["schema_version"] == kSchemaVersion, "schema_version");
    need(j.contains("status") && j["status"].is_string(), "status");
    JobResult r;
    r.status = j["status"].get<std::string>();
    need(r.status == "ok" || r.status == "crash" || r.status == "timeout", "status value " + r.status);
    need(j.contains("tests") && j["tests"].is_array(), "tests");
    for (const auto& t : j["tests"]) {
        need(t.is_object() && t.contains("name") && t["name"].is_string() && t.contains("outcome") &&
                 t["outcome"].is_string(),
             "test entry");
        TestOutcome o{t["name"].get<std::string>(), t["outcome"].get<std::string>()};
        need(o.outcome == "pass" || o.outcome == "fail" || o.outcome == "error", "outcome " + o.outcome);
        r.tests.push_back(std::move(o));
    }
    need(std::is_sorted(r.tests.begin(), r.tests.end(),
                        [](const TestOutcome& a, const TestOutcome& b) { return a.name < b.name; }),
         "tests not ordered by name");
    if (j.contains("returned_value") && !j["returned_value"].is_null()) {
        need(j["returned_value"].is_string(), "returned_value");
        r.returned_value = j["returned_value"].get<std::string>();
    }
    need(r.returned_value.has_value() == (function_call && r.status == "ok"), "returned_value presence");
    if (j.contains("stderr_tail")) {
        need(j["stderr_tail"].is_string(), "stderr_tail");
        r.stderr_tail = j["stderr_tail"].get<std::string>();
    }
    return r;
}

std::vector<std::string> split_command(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> out;
    for (std::string part; in >> part;) out.push_back(part);
    return out;
}

std::vector<std::string> runner_command_from_env() {
    const char* env = std::getenv("OBF_RUNNER");
    auto cmd = env ? split_command(env) : std::vector<std::string>{};
    if (cmd.empty()) throw Error("no runner configured: set OBF_RUNNER or pass --runner");
    return cmd;
}

// ---- process runner ---------------------------------------------------------------------

namespace {

class TempWorkDir {
public:
    TempWorkDir() {
        std::string templ = (std::filesystem::temp_directory_path() / "obfrun-XXXXXX").string();
        if (!mkdtemp(templ.data())) throw ProtocolError("cannot create working directory");
        path_ = templ;
    }
    ~TempWorkDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

void close_fd(int& fd) {
    if (fd >= 0) ::close(fd);
    fd = -1;
}

}  // namespace

ProcessRunner::ProcessRunner(std::vector<std::string> command, double grace_s)
    : command_(std::move(command)), grace_s_(grace_s) {
    if (command_.empty()) throw Error("empty runner command");
    // The child runs in a scratch directory, so relative paths are resolved now.
    for (auto& arg : command_) {
        std::error_code ec;
        std::filesystem::path p(arg);
        if (p.is_relative() && arg.find('/') != std::string::npos && std::filesystem::exists(p, ec)) {
            arg = std::filesystem::absolute(p, ec).string();
        }
    }
}

JobResult ProcessRunner::run(const Job& job, const Limits& limits) {
    TempWorkDir work;
    std::string payload = job_to_json(job).dump() + "\n";

    // Everything the child needs is prepared before fork.
    std::vector<std::string> env_strings = {
        "PATH=" + std::string(std::getenv("PATH") ? std::getenv("PATH") : "/usr/bin:/bin"),
        "PYTHONHASHSEED=0",
        "PYTHONDONTWRITEBYTECODE=1",
        "LANG=C.UTF-8",
        "HOME=" + work.path(),
        "TMPDIR=" + work.path(),
    };
    std::vector<char*> envp;
    for (auto& s : env_strings) envp.push_back(s.data());
    envp.push_back(nullptr);
    std::vector<std::string> args = command_;
    std::vector<char*> argv;
    for (auto& s : args) argv.push_back(s.data());
    argv.push_back(nullptr);
    rlimit mem{};
    mem.rlim_cur = mem.rlim_max = static_cast<rlim_t>(limits.memory_mb) * 1024 * 1024;

    int in_pipe[2], out_pipe[2], err_pipe[2];
    if (pipe2(in_pipe, O_CLOEXEC) || pipe2(out_pipe, O_CLOEXEC) || pipe2(err_pipe, O_CLOEXEC)) {
        throw ProtocolError("pipe failed");
    }
    pid_t pid = fork();
    if (pid < 0) throw ProtocolError("fork failed");
    if (pid == 0) {
        setpgid(0, 0);
        dup2(in_pipe[0], 0);
        dup2(out_pipe[1], 1);
        dup2(err_pipe[1], 2);
        if (chdir(work.path().c_str()) != 0) _exit(126);
        if (limits.memory_mb > 0) setrlimit(RLIMIT_AS, &mem);
        execvpe(argv[0], argv.data(), envp.data());
        _exit(127);
    }
    setpgid(pid, pid);
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    ::close(err_pipe[1]);
    int to_child = in_pipe[1];
    int from_child = out_pipe[0];
    int err_child = err_pipe[0];
    fcntl(to_child, F_SETFL, O_NONBLOCK);

    using clock = std::chrono::steady_clock;
    auto deadline = clock::now() + std::chrono::duration<double>(job.timeout_s + grace_s_);
    std::string out, err;
    std::size_t written = 0;
    bool timed_out = false;
    char buf[65536];
    while (from_child >= 0 || err_child >= 0) {
        std::vector<pollfd> fds;
        if (to_child >= 0) fds.push_back({to_child, POLLOUT, 0});
        if (from_child >= 0) fds.push_back({from_child, POLLIN, 0});
        if (err_child >= 0) fds.push_back({err_child, POLLIN, 0});
        auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now()).count();
        if (left <= 0) {
            timed_out = true;
            break;
        }
        int rc = poll(fds.data(), fds.size(), static_cast<int>(left));
        if (rc < 0 && errno == EINTR) continue;
        if (rc < 0) break;
        for (const auto& p : fds) {
            if (!p.revents) continue;
            if (p.fd == to_child) {
                ssize_t n = ::write(to_child, payload.data() + written, payload.size() - written);
                if (n > 0) written += static_cast<std::size_t>(n);
                if (n < 0 && errno != EAGAIN) written = payload.size();
                if (written >= payload.size()) close_fd(to_child);
            } else {
                ssize_t n = ::read(p.fd, buf, sizeof buf);
                if (n > 0) {
                    (p.fd == from_child ? out : err).append(buf, static_cast<std::size_t>(n));
                } else if (n == 0 || errno != EAGAIN) {
                    if (p.fd == from_child) {
                        close_fd(from_child);
                    } else {
                        close_fd(err_child);
                    }
                }
            }
        }
    }
    close_fd(to_child);
    close_fd(from_child);
    close_fd(err_child);
    if (timed_out) kill(-pid, SIGKILL);
    int status = 0;
    while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    if (timed_out) {
        JobResult r;
        r.status = "timeout";
        r.stderr_tail = "runner exceeded its deadline and was killed";
        return r;
    }
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        throw ProtocolError("runner exited abnormally (status " + std::to_string(status) + "): " +
                            err.substr(err.size() > 500 ? err.size() - 500 : 0));
    }
    auto nl = out.find('\n');
    if (nl == std::string::npos) throw ProtocolError("runner produced no result line");
    if (out.find_first_not_of(" \r\n\t", nl + 1) != std::string::npos) {
        throw ProtocolError("runner produced more than one result line");
    }
    return parse_result(out.substr(0, nl), job.call.has_value());
}

// ---- verdicts -----------------------------------------------------------------------------

namespace {

struct Attempt {
    std::optional<JobResult> result;
    std::string error;
    double seconds = 0;
};

Attempt attempt(Runner& runner, const std::string& code, const std::string& test, const Limits& limits) {
    Attempt a;
    auto start = std::chrono::steady_clock::now();
    try {
        a.result = runner.run(Job{code, test, limits.timeout_s, std::nullopt}, limits);
    } catch (const ProtocolError& e) {
        a.error = e.what();
    }
    a.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return a;
}

bool all_pass(const JobResult& r) {
    return r.status == "ok" && !r.tests.empty() &&
           std::all_of(r.tests.begin(), r.tests.end(), [](const TestOutcome& t) { return t.outcome == "pass"; });
}

Verdict judge(const Attempt& original, const Attempt& variant, const Limits& limits) {
    Verdict v;
    v.wall_seconds = original.seconds + variant.seconds;
    if (original.result) v.original = original.result->tests;
    if (variant.result) v.variant = variant.result->tests;
    auto timeout = [&](const std::string& which) {
        v.status = VerdictStatus::Timeout;
        v.limit_seconds = limits.timeout_s;
        v.detail = which + " exceeded " + std::to_string(limits.timeout_s) + " s";
        return v;
    };
    if (!original.result) {
        v.status = VerdictStatus::RunnerError;
        v.detail = "original: " + original.error;
        return v;
    }
    if (original.result->status == "timeout") return timeout("original");
    if (!all_pass(*original.result)) {
        v.status = VerdictStatus::OriginalFails;
        v.detail = original.result->tests.empty() ? "original has no passing test suite" : "original tests fail";
        if (!original.result->stderr_tail.empty()) v.detail += ": " + original.result->stderr_tail;
        return v;
    }
    if (!variant.result) {
        v.status = VerdictStatus::RunnerError;
        v.detail = "variant: " + variant.error;
        return v;
    }
    if (variant.result->status == "timeout") return timeout("variant");
    if (variant.result->status == "ok" && variant.result->tests == original.result->tests) {
        v.status = VerdictStatus::Equivalent;
        return v;
    }
    v.status = VerdictStatus::Divergent;
    v.detail = variant.result->status == "crash" ? "variant crashed" : "test outcomes differ";
    if (!variant.result->stderr_tail.empty()) v.detail += ": " + variant.result->stderr_tail;
    return v;
}

}  // namespace

Verdict verify_variant(ObfuscationRecord& record, Tag tag, const Limits& limits, Runner& runner) {
    auto it = record.variants.find(tag);
    if (it == record.variants.end()) throw Error("record " + record.task_id + " has no " + std::string(tag_name(tag)) + " variant");
    auto original = attempt(runner, record.original.code, record.original.test_code, limits);
    auto variant = attempt(runner, it->second.code, it->second.test_code, limits);
    return record.verdicts[tag] = judge(original, variant, limits);
}

void verify_record(ObfuscationRecord& record, const Limits& limits, Runner& runner) {
    auto original = attempt(runner, record.original.code, record.original.test_code, limits);
    for (const auto& [tag, variant] : record.variants) {
        bool original_ok = original.result && all_pass(*original.result);
        // Without a clean original there is nothing to compare against.
        Attempt run = original_ok ? attempt(runner, variant.code, variant.test_code, limits) : Attempt{};
        record.verdicts[tag] = judge(original, run, limits);
    }
}

bool CorpusSummary::any_divergent() const {
    auto it = counts.find(VerdictStatus::Divergent);
    return it != counts.end() && it->second > 0;
}

CorpusSummary summarize(const std::vector<ObfuscationRecord>& records) {
    CorpusSummary s;
    for (auto status : {VerdictStatus::Equivalent, VerdictStatus::Divergent, VerdictStatus::OriginalFails,
                        VerdictStatus::RunnerError, VerdictStatus::Timeout}) {
        s.counts[status] = 0;
    }
    std::vector<const ObfuscationRecord*> ordered;
    for (const auto& r : records) ordered.push_back(&r);
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const auto* a, const auto* b) { return a->task_id < b->task_id; });
    for (const auto* r : ordered) {
        for (const auto& [tag, v] : r->verdicts) {
            ++s.counts[v.status];
            if (v.status != VerdictStatus::Equivalent) {
                s.non_equivalent.push_back(r->task_id + "/" + std::string(tag_name(tag)));
            }
        }
    }
    return s;
}

CorpusSummary verify_corpus(std::vector<ObfuscationRecord>& records, const Limits& limits, Runner& runner,
                            int workers) {
    workers = std::max(1, std::min<int>(workers, static_cast<int>(records.size())));
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < records.size();) verify_record(records[i], limits, runner);
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    return summarize(records);
}

nlohmann::json to_json(const CorpusSummary& summary) {
    nlohmann::json counts = nlohmann::json::object();
    for (const auto& [status, n] : summary.counts) counts[std::string(status_name(status))] = n;
    return {{"counts", counts}, {"non_equivalent", summary.non_equivalent}};
}

// ---- fault injection -------------------------------------------------------------------------

std::optional<Variant> inject_fault(const ObfuscationRecord& record, Tag tag, std::uint64_t seed) {
    auto it = record.variants.find(tag);
    if (it == record.variants.end()) return std::nullopt;
    const Variant& variant = it->second;
    std::map<std::string, std::string> back;
    for (const auto& e : variant.map.entries) back[e.to] = e.from;

    auto tree = frontend::parse(variant.code);
    std::set<std::string> present;
    for (const auto& o : tree.occurrences()) present.insert(o.name);
    if (!variant.test_code.empty()) {
        auto test = frontend::parse(variant.test_code);
        for (const auto& o : test.occurrences()) present.insert(o.name);
    }
    // A reverted name must not resolve to anything else, so its use raises.
    std::vector<std::size_t> candidates;
    const auto& occs = tree.occurrences();
    for (std::size_t i = 0; i < occs.size(); ++i) {
        if (occs[i].role != frontend::Role::Reference) continue;
        auto b = back.find(occs[i].name);
        if (b == back.end() || scopes::is_builtin(b->second) || present.count(b->second)) continue;
        candidates.push_back(i);
    }
    if (candidates.empty()) return std::nullopt;
    strategies::Prng rng(strategies::derive_seed(seed, {strategies::hash_text(record.task_id)}));
    std::size_t pick = candidates[rng.below(candidates.size())];
    std::vector<std::string> replacements(occs.size());
    replacements[pick] = back[occs[pick].name];
    Variant faulty = variant;
    faulty.code = frontend::emit(tree.renamed(replacements), {true, true});
    return faulty;
}

}  // namespace obf::verify
