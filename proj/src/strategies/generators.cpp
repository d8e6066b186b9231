#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <sstream>

#include "obf/errors.hpp"
#include "obf/strategies.hpp"
#include "obf/tokenizer.hpp"

namespace obf::strategies {

std::string_view tag_name(Tag tag) {
    switch (tag) {
        case Tag::Alpha: return "alpha";
        case Tag::Ambiguity: return "ambiguity";
        case Tag::CrossDomain: return "crossdomain";
        case Tag::Misleading: return "misleading";
    }
    return "alpha";
}

Tag parse_tag(std::string_view text) {
    for (Tag t : kAllTags) {
        if (tag_name(t) == text) return t;
    }
    throw Error("unknown strategy: " + std::string(text));
}

// ---- randomness ----------------------------------------------------------------------

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = splitmix64(seed);
    for (auto p : parts) h = splitmix64(h ^ splitmix64(p));
    return h;
}

std::uint64_t hash_text(std::string_view text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

Prng::Prng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

std::uint64_t Prng::next() { return engine_(); }

std::uint64_t Prng::below(std::uint64_t bound) {
    if (bound == 0) throw Error("Prng::below: zero bound");
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % bound;
}

// ---- lexicons --------------------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace

Lexicon parse_lexicon(std::string_view text, std::string version) {
    Lexicon lex;
    lex.version = std::move(version);
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::string entry = trim(line);
        if (entry.empty()) continue;
        LexiconEntry e;
        if (auto colon = entry.find(':'); colon != std::string::npos) {
            std::string tag = trim(std::string_view(entry).substr(0, colon));
            if (tag == "function") {
                e.kind = EntryKind::Function;
            } else if (tag == "value") {
                e.kind = EntryKind::Value;
            } else if (tag == "class") {
                e.kind = EntryKind::Class;
            } else {
                throw Error("lexicon line " + std::to_string(lineno) + ": unknown kind '" + tag + "'");
            }
            entry = trim(std::string_view(entry).substr(colon + 1));
        }
        if (!frontend::is_identifier(entry) || frontend::is_keyword(entry) || frontend::is_dunder(entry)) {
            throw Error("lexicon line " + std::to_string(lineno) + ": not a usable identifier '" + entry + "'");
        }
        e.name = entry;
        lex.entries.push_back(std::move(e));
    }
    return lex;
}

Lexicon load_lexicon(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read lexicon " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_lexicon(ss.str(), path.stem().string());
}

// ---- alpha -----------------------------------------------------------------------------

std::string gen_alpha(BindingKind kind, int ordinal) {
    switch (kind) {
        case BindingKind::Class: return "class" + std::to_string(ordinal);
        case BindingKind::Function:
        case BindingKind::Method: return "method" + std::to_string(ordinal);
        default: return "var" + std::to_string(ordinal);
    }
}

// ---- ambiguity --------------------------------------------------------------------------

namespace {

constexpr int kMinAmbiguous = 6;
constexpr int kMaxAmbiguous = 14;

}  // namespace

std::string gen_ambiguous(std::uint64_t seed, int ordinal, const AmbiguousOptions& options) {
    if (ordinal < 1) throw Error("ordinal must be positive");
    const std::uint64_t base = options.allow_digit ? 3 : 2;
    static constexpr char kBody[] = {'l', 'I', '1'};
    const auto index = static_cast<std::uint64_t>(ordinal - 1);

    // Shortest length whose body can encode this ordinal.
    int min_len = kMinAmbiguous;
    for (; min_len <= kMaxAmbiguous; ++min_len) {
        std::uint64_t cap = 1;
        for (int i = 0; i < min_len - 1; ++i) cap *= base;
        if (index < cap) break;
    }
    if (min_len > kMaxAmbiguous) throw ExhaustedLexicon("ambiguous name space exhausted");

    Prng pick_len(derive_seed(seed, {0x4c, static_cast<std::uint64_t>(ordinal)}));
    const int len = min_len + static_cast<int>(pick_len.below(kMaxAmbiguous - min_len + 1));

    // Per-length first character and digit mask keep names of one length injective.
    Prng mask(derive_seed(seed, {0x4d, static_cast<std::uint64_t>(len)}));
    std::string name(1, mask.below(2) == 0 ? 'l' : 'I');
    std::uint64_t rest = index;
    for (int i = 0; i < len - 1; ++i) {
        std::uint64_t digit = (rest % base + mask.below(base)) % base;
        rest /= base;
        name.push_back(kBody[digit]);
    }
    return name;
}

// ---- crossdomain ------------------------------------------------------------------------

std::string gen_crossdomain(std::uint64_t seed, int ordinal, const Lexicon& lexicon) {
    if (lexicon.entries.empty()) throw EmptyLexicon();
    if (ordinal < 1) throw Error("ordinal must be positive");
    static constexpr char kDigits[] = "0123456789abcdefghijklmnopqrstuvwxyz";
    constexpr std::uint64_t kSuffixes = 36 * 36;
    const std::uint64_t n = lexicon.entries.size() * kSuffixes;
    const auto index = static_cast<std::uint64_t>(ordinal - 1);
    if (index >= n) throw ExhaustedLexicon("crossdomain lexicon exhausted");

    // Affine permutation of [0, n): distinct ordinals give distinct (word, suffix) pairs.
    Prng rng(derive_seed(seed, {0x43}));
    std::uint64_t a;
    do {
        a = rng.below(n);
    } while (std::gcd(a, n) != 1);
    const std::uint64_t b = rng.below(n);
    const auto p = static_cast<std::uint64_t>((static_cast<unsigned __int128>(a) * index + b) % n);

    std::string word = lexicon.entries[p / kSuffixes].name;
    std::transform(word.begin(), word.end(), word.begin(), [](unsigned char c) { return std::tolower(c); });
    const std::uint64_t s = p % kSuffixes;
    return word + "_" + kDigits[s / 36] + kDigits[s % 36];
}

// ---- misleading --------------------------------------------------------------------------

std::set<std::string> stems(std::string_view name) {
    std::vector<std::string> words;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) words.push_back(cur);
        cur.clear();
    };
    for (std::size_t i = 0; i < name.size(); ++i) {
        auto c = static_cast<unsigned char>(name[i]);
        if (c == '_' || std::isdigit(c)) {
            flush();
            continue;
        }
        if (std::isupper(c) && !cur.empty()) {
            bool prev_lower = std::islower(static_cast<unsigned char>(name[i - 1]));
            bool next_lower = i + 1 < name.size() && std::islower(static_cast<unsigned char>(name[i + 1]));
            // camelCase boundary, or end of an acronym as in "HTTPServer".
            if (prev_lower || (next_lower && std::isupper(static_cast<unsigned char>(name[i - 1])))) flush();
        }
        cur.push_back(static_cast<char>(std::tolower(c)));
    }
    flush();

    auto ends_with = [](const std::string& w, std::string_view suf) {
        return w.size() >= suf.size() && w.compare(w.size() - suf.size(), suf.size(), suf) == 0;
    };
    std::set<std::string> out;
    for (auto w : words) {
        if (ends_with(w, "ing") && w.size() > 5) {
            w.resize(w.size() - 3);
        } else if (ends_with(w, "ed") && w.size() > 4) {
            w.resize(w.size() - 2);
        } else if (w.size() > 4 && (ends_with(w, "ses") || ends_with(w, "xes") || ends_with(w, "zes") ||
                                    ends_with(w, "ches") || ends_with(w, "shes"))) {
            w.resize(w.size() - 2);
        } else if (ends_with(w, "s") && !ends_with(w, "ss") && w.size() > 3) {
            w.resize(w.size() - 1);
        }
        if (ends_with(w, "e") && w.size() > 3) w.pop_back();
        out.insert(w);
    }
    return out;
}

namespace {

EntryKind role_of(BindingKind kind) {
    switch (kind) {
        case BindingKind::Class: return EntryKind::Class;
        case BindingKind::Function:
        case BindingKind::Method: return EntryKind::Function;
        default: return EntryKind::Value;
    }
}

}  // namespace

std::string gen_misleading(std::uint64_t seed, const Binding& binding, const Lexicon& lexicon) {
    if (lexicon.entries.empty()) throw EmptyLexicon();
    const EntryKind role = role_of(binding.kind);
    const auto original = stems(binding.name);
    std::vector<const LexiconEntry*> candidates;
    for (const auto& e : lexicon.entries) {
        if (e.kind != EntryKind::Any && e.kind != role) continue;
        auto s = stems(e.name);
        bool shared = std::any_of(s.begin(), s.end(), [&](const std::string& w) { return original.count(w) > 0; });
        if (!shared) candidates.push_back(&e);
    }
    if (candidates.empty()) {
        throw ExhaustedLexicon("no misleading name disjoint from '" + binding.name + "' in lexicon " + lexicon.version);
    }
    Prng rng(derive_seed(seed, {0x4d49, hash_text(binding.name), static_cast<std::uint64_t>(binding.kind)}));
    return candidates[rng.below(candidates.size())]->name;
}

}  // namespace obf::strategies
