#include "obf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "obf/errors.hpp"
#include "obf/frontend.hpp"

namespace obf::metrics {

using frontend::Node;
using frontend::NodeKind;

namespace {

class ComplexityWalker {
public:
    ComplexityReport run(const Node& root) {
        visit(root, "", -1);
        if (!report_.functions.empty()) {
            report_.unit_cc_max = 0;
            report_.unit_cc_sum = 0;
            for (const auto& f : report_.functions) {
                report_.unit_cc_max = std::max(report_.unit_cc_max, f.cc);
                report_.unit_cc_sum += f.cc;
            }
        }
        return std::move(report_);
    }

private:
    void add(int fn, int n) {
        if (fn >= 0) report_.functions[fn].cc += n;
    }

    void kids(const Node& n, const std::string& prefix, int fn, std::size_t from = 0) {
        for (std::size_t i = from; i < n.kids.size(); ++i) {
            if (n.kids[i]) visit(*n.kids[i], prefix, fn);
        }
    }

    void visit(const Node& n, const std::string& prefix, int fn) {
        switch (n.kind) {
            case NodeKind::FunctionDef: {
                // Decorators, defaults and annotations run in the enclosing scope.
                for (std::size_t i = 1; i <= 3; ++i) {
                    if (n.kid(i)) visit(*n.kid(i), prefix, fn);
                }
                std::string qual = prefix + n.kid(0)->value;
                report_.functions.push_back({qual, n.line, 1});
                int me = static_cast<int>(report_.functions.size()) - 1;
                visit(*n.kid(4), qual + ".<locals>.", me);
                return;
            }
            case NodeKind::ClassDef: {
                if (n.kid(1)) visit(*n.kid(1), prefix, fn);
                if (n.kid(2)) visit(*n.kid(2), prefix, fn);
                visit(*n.kid(3), prefix + n.kid(0)->value + ".", fn);
                return;
            }
            case NodeKind::If:
            case NodeKind::For:
            case NodeKind::While:
            case NodeKind::ExceptHandler:
            case NodeKind::IfExp: add(fn, 1); break;
            case NodeKind::BoolOp: add(fn, static_cast<int>(n.kids.size()) - 1); break;
            case NodeKind::Comprehension: add(fn, static_cast<int>(n.kids.size()) - 2); break;
            default: break;
        }
        kids(n, prefix, fn);
    }

    ComplexityReport report_;
};

double percentile(const std::vector<int>& sorted, double q) {
    if (sorted.empty()) return 0;
    double pos = q * static_cast<double>(sorted.size() - 1);
    auto lo = static_cast<std::size_t>(std::floor(pos));
    auto hi = static_cast<std::size_t>(std::ceil(pos));
    double frac = pos - static_cast<double>(lo);
    return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

nlohmann::json summary_json(const LengthSummary& s) {
    nlohmann::json hist = nlohmann::json::object();
    for (const auto& [len, n] : s.histogram) hist[std::to_string(len)] = n;
    return {{"count", s.count}, {"median", s.median}, {"mean", s.mean}, {"p90", s.p90}, {"histogram", hist}};
}

}  // namespace

ComplexityReport cyclomatic(const frontend::SyntaxTree& tree) { return ComplexityWalker().run(tree.root()); }

std::vector<SourceUnit> filter_corpus(const std::vector<SourceUnit>& units, int threshold, Aggregate aggregate) {
    if (threshold < 1) throw DomainError("complexity threshold must be at least 1");
    std::vector<SourceUnit> out;
    for (const auto& u : units) {
        auto report = cyclomatic(frontend::parse(u.code));
        int value = aggregate == Aggregate::Max ? report.unit_cc_max : report.unit_cc_sum;
        if (value >= threshold) out.push_back(u);
    }
    return out;
}

LengthSummary summarize_lengths(std::vector<int> lengths) {
    LengthSummary s;
    s.count = static_cast<int>(lengths.size());
    if (lengths.empty()) return s;
    std::sort(lengths.begin(), lengths.end());
    s.median = percentile(lengths, 0.5);
    s.p90 = percentile(lengths, 0.9);
    s.mean = std::accumulate(lengths.begin(), lengths.end(), 0.0) / static_cast<double>(lengths.size());
    for (int len : lengths) ++s.histogram[len];
    return s;
}

IdentifierStats identifier_stats(const scopes::ScopeGraph& graph, const scopes::RenamePolicy& policy) {
    IdentifierStats stats;
    std::vector<int> all;
    std::map<std::string, std::vector<int>> per_kind;
    for (int id : scopes::renameable_set(graph, policy)) {
        const auto& b = graph.bindings[id];
        int len = 0;
        for (unsigned char c : b.name) len += (c & 0xC0) != 0x80;  // code points
        stats.lengths.emplace_back(b.name, len);
        all.push_back(len);
        per_kind[std::string(scopes::kind_name(b.kind))].push_back(len);
    }
    stats.summary = summarize_lengths(all);
    for (auto& [kind, lens] : per_kind) stats.by_kind[kind] = summarize_lengths(lens);
    return stats;
}

nlohmann::json to_json(const ComplexityReport& report) {
    nlohmann::json fns = nlohmann::json::array();
    for (const auto& f : report.functions) fns.push_back({{"qualname", f.qualname}, {"line", f.line}, {"cc", f.cc}});
    return {{"functions", fns}, {"unit_cc_max", report.unit_cc_max}, {"unit_cc_sum", report.unit_cc_sum}};
}

nlohmann::json to_json(const IdentifierStats& stats) {
    nlohmann::json lengths = nlohmann::json::array();
    for (const auto& [name, len] : stats.lengths) lengths.push_back({{"name", name}, {"length", len}});
    nlohmann::json kinds = nlohmann::json::object();
    for (const auto& [kind, s] : stats.by_kind) kinds[kind] = summary_json(s);
    return {{"lengths", lengths}, {"summary", summary_json(stats.summary)}, {"by_kind", kinds}};
}

std::string histogram_csv(const LengthSummary& summary) {
    std::ostringstream out;
    out << "length,count\n";
    for (const auto& [len, n] : summary.histogram) out << len << ',' << n << '\n';
    return out.str();
}

}  // namespace obf::metrics
