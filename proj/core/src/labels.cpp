#include "veristage/labels.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace veristage {

const char* to_string(DiagKind kind) {
    switch (kind) {
    case DiagKind::NearMiss: return "near_miss";
    case DiagKind::OrphanLabel: return "orphan_label";
    case DiagKind::DuplicateSibling: return "duplicate_sibling";
    case DiagKind::UnresolvedLabel: return "unresolved_label";
    }
    return "unknown";
}

} // namespace veristage

namespace veristage::labels {

namespace {

bool is_name_char(char c) {
    return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
}

bool is_name_start(char c) {
    return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

// Case-insensitive match of a two-char level code; returns the level when
// `a b` spells FG, FC or CK in any case.
std::optional<LabelLevel> level_of(char a, char b) {
    char ua = static_cast<char>(std::toupper(static_cast<unsigned char>(a)));
    char ub = static_cast<char>(std::toupper(static_cast<unsigned char>(b)));
    if (ua == 'F' && ub == 'G') return LabelLevel::FG;
    if (ua == 'F' && ub == 'C') return LabelLevel::FC;
    if (ua == 'C' && ub == 'K') return LabelLevel::CK;
    return std::nullopt;
}

bool strict_level(std::string_view body, LabelLevel& out) {
    if (body.size() < 2)
        return false;
    if (body[0] == 'F' && body[1] == 'G') { out = LabelLevel::FG; return true; }
    if (body[0] == 'F' && body[1] == 'C') { out = LabelLevel::FC; return true; }
    if (body[0] == 'C' && body[1] == 'K') { out = LabelLevel::CK; return true; }
    return false;
}

} // namespace

const char* to_string(LabelLevel level) {
    switch (level) {
    case LabelLevel::FG: return "FG";
    case LabelLevel::FC: return "FC";
    case LabelLevel::CK: return "CK";
    }
    return "??";
}

bool is_valid_name(std::string_view name) {
    if (name.empty() || !is_name_start(name[0]))
        return false;
    return std::all_of(name.begin(), name.end(), is_name_char);
}

std::string Label::render() const {
    std::string out("<");
    out += to_string(level);
    out += '-';
    out += name;
    out += '>';
    return out;
}

Label make_label(LabelLevel level, std::string_view name) {
    if (!is_valid_name(name))
        throw std::invalid_argument("invalid label name: \"" + std::string(name) + "\"");
    return Label{level, std::string(name)};
}

std::string QualifiedCheck::path() const {
    std::string out("FG-");
    out += fg;
    out += "/FC-";
    out += fc;
    out += "/CK-";
    out += ck;
    return out;
}

std::optional<QualifiedCheck> parse_qualified_path(std::string_view text) {
    auto take = [&](std::string_view prefix, char stop) -> std::optional<std::string> {
        if (text.substr(0, prefix.size()) != prefix)
            return std::nullopt;
        text.remove_prefix(prefix.size());
        std::string name;
        if (stop == '\0') {
            name = std::string(text);
            text = {};
        } else {
            auto pos = text.find(stop);
            if (pos == std::string_view::npos)
                return std::nullopt;
            name = std::string(text.substr(0, pos));
            text.remove_prefix(pos + 1);
        }
        if (!is_valid_name(name))
            return std::nullopt;
        return name;
    };
    auto fg = take("FG-", '/');
    if (!fg) return std::nullopt;
    auto fc = take("FC-", '/');
    if (!fc) return std::nullopt;
    auto ck = take("CK-", '\0');
    if (!ck) return std::nullopt;
    return QualifiedCheck{*fg, *fc, *ck};
}

std::size_t LabelTree::checkpoint_count() const {
    std::size_t n = 0;
    for (const auto& g : groups)
        n += g.checkpoints.size();
    return n;
}

std::size_t LabelTree::check_count() const {
    std::size_t n = 0;
    for (const auto& g : groups)
        for (const auto& c : g.checkpoints)
            n += c.checks.size();
    return n;
}

std::optional<std::string> LabelTree::parent_of_checkpoint(std::string_view fc) const {
    std::optional<std::string> found;
    for (const auto& g : groups)
        for (const auto& c : g.checkpoints)
            if (c.name == fc) {
                if (found)
                    return std::nullopt; // ambiguous
                found = g.name;
            }
    return found;
}

LexResult lex_labels(std::string_view text) {
    LexResult out;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        if (text[i] != '<') {
            ++i;
            continue;
        }
        // Find the token end: the first '>' not preceded by another '<'.
        std::size_t k = i + 1;
        while (k < n && text[k] != '>' && text[k] != '<')
            ++k;
        if (k >= n)
            break;
        if (text[k] == '<') {
            i = k; // restart at the inner '<'
            continue;
        }
        std::string_view body = text.substr(i + 1, k - i - 1);
        LabelLevel level;
        if (strict_level(body, level) && body.size() >= 3 && body[2] == '-' &&
            is_valid_name(body.substr(3))) {
            out.labels.push_back({Label{level, std::string(body.substr(3))}, i});
        } else if (body.size() >= 3 && body[2] == '-' && level_of(body[0], body[1])) {
            // Label-shaped but invalid: case drift, empty or illegal name.
            std::string token(text.substr(i, k - i + 1));
            out.warnings.push_back({DiagKind::NearMiss,
                                    "malformed label token \"" + token + "\"", "", i});
        }
        i = k + 1;
    }
    return out;
}

BuildTreeResult build_tree(std::span<const LexedLabel> ordered) {
    BuildTreeResult out;
    auto& groups = out.tree.groups;
    // Indices of the nearest preceding FG / FC; npos means none yet.
    constexpr std::size_t none = static_cast<std::size_t>(-1);
    std::size_t cur_group = none;
    std::size_t cur_cp = none;

    auto find_group = [&](const std::string& name) {
        for (std::size_t g = 0; g < groups.size(); ++g)
            if (groups[g].name == name)
                return g;
        return none;
    };

    for (const auto& item : ordered) {
        const auto& name = item.label.name;
        switch (item.label.level) {
        case LabelLevel::FG: {
            if (auto g = find_group(name); g != none) {
                out.diagnostics.push_back({DiagKind::DuplicateSibling,
                                           "duplicate sibling label <FG-" + name + ">", "",
                                           item.offset});
                cur_group = g; // nearest-preceding context still names this group
                cur_cp = none;
                break;
            }
            groups.push_back({name, {}});
            cur_group = groups.size() - 1;
            cur_cp = none;
            break;
        }
        case LabelLevel::FC: {
            if (cur_group == none) {
                out.diagnostics.push_back({DiagKind::OrphanLabel,
                                           "orphan label <FC-" + name +
                                               ">: no preceding function group",
                                           "", item.offset});
                break;
            }
            auto& cps = groups[cur_group].checkpoints;
            auto it = std::find_if(cps.begin(), cps.end(),
                                   [&](const auto& c) { return c.name == name; });
            if (it != cps.end()) {
                out.diagnostics.push_back({DiagKind::DuplicateSibling,
                                           "duplicate sibling label <FC-" + name +
                                               "> under FG-" + groups[cur_group].name,
                                           "", item.offset});
                cur_cp = static_cast<std::size_t>(it - cps.begin());
                break;
            }
            cps.push_back({name, {}});
            cur_cp = cps.size() - 1;
            break;
        }
        case LabelLevel::CK: {
            if (cur_group == none || cur_cp == none) {
                out.diagnostics.push_back({DiagKind::OrphanLabel,
                                           "orphan label <CK-" + name +
                                               ">: no preceding function checkpoint",
                                           "", item.offset});
                break;
            }
            auto& cp = groups[cur_group].checkpoints[cur_cp];
            if (std::find(cp.checks.begin(), cp.checks.end(), name) != cp.checks.end()) {
                out.diagnostics.push_back({DiagKind::DuplicateSibling,
                                           "duplicate sibling label <CK-" + name +
                                               "> under FG-" + groups[cur_group].name +
                                               "/FC-" + cp.name,
                                           "", item.offset});
                break;
            }
            cp.checks.push_back(name);
            break;
        }
        }
    }
    return out;
}

PathSet flatten(const LabelTree& tree) {
    PathSet out;
    for (const auto& g : tree.groups)
        for (const auto& c : g.checkpoints)
            for (const auto& k : c.checks)
                out.insert({g.name, c.name, k});
    return out;
}

ConsistencyDiff diff_bidirectional(const PathSet& reference, const PathSet& candidate) {
    ConsistencyDiff d;
    std::set_difference(reference.begin(), reference.end(), candidate.begin(), candidate.end(),
                        std::inserter(d.missing, d.missing.end()));
    std::set_difference(candidate.begin(), candidate.end(), reference.begin(), reference.end(),
                        std::inserter(d.extra, d.extra.end()));
    return d;
}

std::string to_annotated_text(const LabelTree& tree) {
    std::string out;
    for (const auto& g : tree.groups) {
        out += Label{LabelLevel::FG, g.name}.render();
        out += '\n';
        for (const auto& c : g.checkpoints) {
            out += Label{LabelLevel::FC, c.name}.render();
            out += '\n';
            for (const auto& k : c.checks) {
                out += Label{LabelLevel::CK, k}.render();
                out += '\n';
            }
        }
    }
    return out;
}

} // namespace veristage::labels
