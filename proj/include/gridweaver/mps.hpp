#pragma once

#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gridweaver/lp.hpp"

namespace gridweaver {

/// Serialize an LP as free-format MPS. Output is byte-deterministic:
/// fixed section order, insertion-ordered rows/columns, shortest
/// round-trip numbers. Zero objective coefficients are omitted; columns
/// that appear nowhere in the matrix are introduced by their BOUNDS
/// entries. An objective constant k is encoded as an RHS entry -k on
/// the objective row.
inline std::string write_mps(const LpProblem& p) {
    p.validate();
    std::string out;
    out.reserve(1024 + 48 * p.entries.size());
    auto line = [&](std::initializer_list<std::string_view> fields) {
        bool first = true;
        for (const auto f : fields) {
            out += first ? "" : "  ";
            out += f;
            first = false;
        }
        out += '\n';
    };

    line({"NAME", p.name});
    line({"OBJSENSE"});
    line({"    MIN"});
    line({"ROWS"});
    line({" N", p.objective_name});

    const auto nrows = static_cast<std::size_t>(p.num_rows());
    const auto ncols = static_cast<std::size_t>(p.num_cols());
    std::vector<char> row_type(nrows);
    for (std::size_t i = 0; i < nrows; ++i) {
        const double lo = p.row_lower[i], up = p.row_upper[i];
        char t;
        if (lo == up) t = 'E';
        else if (std::isfinite(lo) && !std::isfinite(up)) t = 'G';
        else if (!std::isfinite(lo) && !std::isfinite(up)) t = 'N';
        else t = 'L';  // finite upper; two-sided rows add a RANGES entry
        row_type[i] = t;
        line({std::string(" ") + t, p.row_names[i]});
    }

    // gather entries per column, rows in insertion order
    std::vector<std::vector<std::pair<int, double>>> by_col(ncols);
    for (const auto& e : p.entries)
        by_col[static_cast<std::size_t>(e.col)].push_back({e.row, e.value});
    for (auto& v : by_col) {
        std::sort(v.begin(), v.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        // merge duplicates
        std::vector<std::pair<int, double>> merged;
        for (const auto& [r, val] : v) {
            if (!merged.empty() && merged.back().first == r)
                merged.back().second += val;
            else
                merged.push_back({r, val});
        }
        v = std::move(merged);
    }

    line({"COLUMNS"});
    for (std::size_t j = 0; j < ncols; ++j) {
        if (p.obj[j] != 0.0)
            line({"   ", p.col_names[j], p.objective_name, fmt_double(p.obj[j])});
        for (const auto& [r, val] : by_col[j]) {
            if (val == 0.0) continue;
            line({"   ", p.col_names[j], p.row_names[static_cast<std::size_t>(r)], fmt_double(val)});
        }
    }

    line({"RHS"});
    if (p.objective_constant != 0.0)
        line({"   ", "RHS", p.objective_name, fmt_double(-p.objective_constant)});
    for (std::size_t i = 0; i < nrows; ++i) {
        double rhs = 0;
        switch (row_type[i]) {
            case 'E': rhs = p.row_lower[i]; break;
            case 'G': rhs = p.row_lower[i]; break;
            case 'L': rhs = p.row_upper[i]; break;
            default: continue;  // free row, no RHS
        }
        if (rhs != 0.0) line({"   ", "RHS", p.row_names[i], fmt_double(rhs)});
    }

    bool any_range = false;
    for (std::size_t i = 0; i < nrows; ++i)
        if (row_type[i] == 'L' && std::isfinite(p.row_lower[i])) any_range = true;
    if (any_range) {
        line({"RANGES"});
        for (std::size_t i = 0; i < nrows; ++i)
            if (row_type[i] == 'L' && std::isfinite(p.row_lower[i]))
                line({"   ", "RNG", p.row_names[i], fmt_double(p.row_upper[i] - p.row_lower[i])});
    }

    line({"BOUNDS"});
    for (std::size_t j = 0; j < ncols; ++j) {
        const double lo = p.col_lower[j], up = p.col_upper[j];
        if (lo == 0.0 && !std::isfinite(up)) continue;  // MPS default
        if (lo == up) {
            line({" FX", "BND", p.col_names[j], fmt_double(lo)});
            continue;
        }
        if (!std::isfinite(lo) && !std::isfinite(up)) {
            line({" FR", "BND", p.col_names[j]});
            continue;
        }
        if (!std::isfinite(lo))
            line({" MI", "BND", p.col_names[j]});
        else if (lo != 0.0)
            line({" LO", "BND", p.col_names[j], fmt_double(lo)});
        if (std::isfinite(up)) line({" UP", "BND", p.col_names[j], fmt_double(up)});
    }
    line({"ENDATA"});
    return out;
}

namespace detail {

inline std::vector<std::string> mps_tokens(const std::string& line) {
    std::vector<std::string> toks;
    std::istringstream ss(line);
    std::string t;
    while (ss >> t) toks.push_back(t);
    return toks;
}

}  // namespace detail

/// Parse free-format MPS back into an LpProblem. Supports the sections
/// and bound types the writer emits plus OBJSENSE MAX (costs negated)
/// and PL/BV-free integer-less documents; integer markers are rejected.
inline LpProblem read_mps(const std::string& text) {
    LpProblem p;
    p.name = "LP";

    enum class Section { none, rows, columns, rhs, ranges, bounds, objsense };
    Section section = Section::none;
    bool maximize = false;

    std::map<std::string, int, std::less<>> row_index;
    std::map<std::string, int, std::less<>> col_index;
    std::vector<char> row_type;
    std::string obj_name;
    bool have_obj = false;

    auto get_col = [&](const std::string& name) -> int {
        auto it = col_index.find(name);
        if (it != col_index.end()) return it->second;
        const int j = p.add_col(name, 0.0, kLpInf, 0.0);
        col_index.emplace(name, j);
        return j;
    };
    auto get_row = [&](const std::string& name) -> int {
        auto it = row_index.find(name);
        if (it == row_index.end()) throw ParseError("MPS: unknown row " + name);
        return it->second;
    };

    std::istringstream stream(text);
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(stream, raw)) {
        ++lineno;
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        if (raw.empty() || raw[0] == '*') continue;
        const auto toks = detail::mps_tokens(raw);
        if (toks.empty()) continue;

        const bool section_header = raw[0] != ' ' && raw[0] != '\t';
        if (section_header) {
            const std::string& kw = toks[0];
            if (kw == "NAME") {
                if (toks.size() > 1) p.name = toks[1];
                continue;
            }
            if (kw == "OBJSENSE") {
                section = Section::objsense;
                if (toks.size() > 1) {
                    maximize = lower(toks[1]) == "max" || lower(toks[1]) == "maximize";
                    section = Section::none;
                }
                continue;
            }
            if (kw == "ROWS") { section = Section::rows; continue; }
            if (kw == "COLUMNS") { section = Section::columns; continue; }
            if (kw == "RHS") { section = Section::rhs; continue; }
            if (kw == "RANGES") { section = Section::ranges; continue; }
            if (kw == "BOUNDS") { section = Section::bounds; continue; }
            if (kw == "ENDATA") break;
            throw ParseError("MPS line " + std::to_string(lineno) + ": unknown section " + kw);
        }

        switch (section) {
            case Section::objsense: {
                maximize = lower(toks[0]) == "max" || lower(toks[0]) == "maximize";
                section = Section::none;
                break;
            }
            case Section::rows: {
                if (toks.size() < 2)
                    throw ParseError("MPS line " + std::to_string(lineno) + ": malformed row");
                const char t = static_cast<char>(std::toupper(toks[0][0]));
                const std::string& name = toks[1];
                if (t == 'N') {
                    if (!have_obj) {
                        obj_name = name;
                        p.objective_name = name;
                        have_obj = true;
                    } else {
                        row_index.emplace(name, p.add_row(name, -kLpInf, kLpInf));
                        row_type.push_back('N');
                    }
                } else if (t == 'E' || t == 'L' || t == 'G') {
                    double lo = -kLpInf, up = kLpInf;
                    if (t == 'E') lo = up = 0;
                    if (t == 'L') up = 0;
                    if (t == 'G') lo = 0;
                    row_index.emplace(name, p.add_row(name, lo, up));
                    row_type.push_back(t);
                } else {
                    throw ParseError("MPS line " + std::to_string(lineno) + ": bad row type");
                }
                break;
            }
            case Section::columns: {
                if (toks.size() >= 3 && toks[1] == "'MARKER'")
                    throw ParseError("MPS: integer markers are not supported");
                if (toks.size() < 3 || toks.size() % 2 == 0)
                    throw ParseError("MPS line " + std::to_string(lineno) + ": malformed column");
                const int j = get_col(toks[0]);
                for (std::size_t k = 1; k + 1 < toks.size(); k += 2) {
                    const auto val = parse_double(toks[k + 1]);
                    if (!val)
                        throw ParseError("MPS line " + std::to_string(lineno) + ": bad number");
                    if (have_obj && toks[k] == obj_name)
                        p.obj[static_cast<std::size_t>(j)] += *val;
                    else
                        p.add_entry(get_row(toks[k]), j, *val);
                }
                break;
            }
            case Section::rhs: {
                // first token is the RHS set name
                for (std::size_t k = 1; k + 1 < toks.size(); k += 2) {
                    const auto val = parse_double(toks[k + 1]);
                    if (!val)
                        throw ParseError("MPS line " + std::to_string(lineno) + ": bad number");
                    if (have_obj && toks[k] == obj_name) {
                        p.objective_constant = -*val;
                        continue;
                    }
                    const int r = get_row(toks[k]);
                    const char t = row_type[static_cast<std::size_t>(r)];
                    auto sr = static_cast<std::size_t>(r);
                    if (t == 'E') p.row_lower[sr] = p.row_upper[sr] = *val;
                    if (t == 'L') p.row_upper[sr] = *val;
                    if (t == 'G') p.row_lower[sr] = *val;
                }
                break;
            }
            case Section::ranges: {
                for (std::size_t k = 1; k + 1 < toks.size(); k += 2) {
                    const auto val = parse_double(toks[k + 1]);
                    if (!val)
                        throw ParseError("MPS line " + std::to_string(lineno) + ": bad number");
                    const int r = get_row(toks[k]);
                    auto sr = static_cast<std::size_t>(r);
                    const char t = row_type[sr];
                    const double R = *val;
                    if (t == 'L') p.row_lower[sr] = p.row_upper[sr] - std::abs(R);
                    else if (t == 'G') p.row_upper[sr] = p.row_lower[sr] + std::abs(R);
                    else if (t == 'E') {
                        if (R >= 0) p.row_upper[sr] = p.row_lower[sr] + R;
                        else p.row_lower[sr] = p.row_upper[sr] + R;
                    }
                }
                break;
            }
            case Section::bounds: {
                if (toks.size() < 3)
                    throw ParseError("MPS line " + std::to_string(lineno) + ": malformed bound");
                const std::string type = toks[0];
                const int j = get_col(toks[2]);
                auto sj = static_cast<std::size_t>(j);
                auto value = [&]() -> double {
                    if (toks.size() < 4)
                        throw ParseError("MPS line " + std::to_string(lineno) +
                                         ": bound needs a value");
                    const auto v = parse_double(toks[3]);
                    if (!v) throw ParseError("MPS line " + std::to_string(lineno) + ": bad number");
                    return *v;
                };
                if (type == "UP") p.col_upper[sj] = value();
                else if (type == "LO") p.col_lower[sj] = value();
                else if (type == "FX") p.col_lower[sj] = p.col_upper[sj] = value();
                else if (type == "FR") { p.col_lower[sj] = -kLpInf; p.col_upper[sj] = kLpInf; }
                else if (type == "MI") p.col_lower[sj] = -kLpInf;
                else if (type == "PL") p.col_upper[sj] = kLpInf;
                else throw ParseError("MPS line " + std::to_string(lineno) +
                                      ": unsupported bound type " + type);
                break;
            }
            case Section::none:
                throw ParseError("MPS line " + std::to_string(lineno) + ": data before a section");
        }
    }

    if (maximize)
        for (double& c : p.obj) c = -c;
    p.validate();
    return p;
}

}  // namespace gridweaver
