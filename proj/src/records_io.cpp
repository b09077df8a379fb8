#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "auditcalib/error.hpp"
#include "auditcalib/ingest.hpp"
#include "auditcalib/text.hpp"

using nlohmann::json;

namespace auditcalib::ingest {

// --- annotations ----------------------------------------------------------

AnnotationSet load_annotations(std::istream& in, const std::string& source) {
    const auto rows = text::read_csv(in);
    if (rows.empty()) throw Error(ErrorCode::format, source, "missing header row");

    const auto& header = rows.front();
    auto column = [&](std::string_view name) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (text::trim(header[i]) == name) return i;
        }
        throw Error(ErrorCode::format, std::string(name), "column missing in " + source);
    };
    const std::size_t c_pmcid = column("pmcid"), c_item = column("consort_item"), c_sentence = column("sentence");
    const std::size_t width = std::max({c_pmcid, c_item, c_sentence}) + 1;

    AnnotationSet out;
    std::map<std::pair<std::string, std::string>, std::vector<std::string>> grouped;
    std::set<std::string> papers, items;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        ++out.rows;
        if (row.size() < width) {
            throw Error(ErrorCode::format, source, "row " + std::to_string(r + 1) + " has too few columns");
        }
        const std::string pmcid = text::trim(row[c_pmcid]);
        const std::string item = text::trim(row[c_item]);
        const std::string sentence = text::trim(row[c_sentence]);
        if (pmcid.empty() || item.empty()) {
            throw Error(ErrorCode::format, source, "row " + std::to_string(r + 1) + " lacks pmcid or item");
        }
        if (item == "0" || sentence.empty()) {
            ++out.dropped_rows;
            continue;
        }
        auto& sentences = grouped[{pmcid, item}];
        if (std::find(sentences.begin(), sentences.end(), sentence) == sentences.end()) {
            sentences.push_back(sentence);
        }
        papers.insert(pmcid);
        items.insert(item);
    }
    if (grouped.empty()) throw Error(ErrorCode::empty_annotations, source, "no rows with an item other than 0");

    for (auto& [key, sentences] : grouped) {
        out.annotations.push_back({key.first, key.second, std::move(sentences)});
    }
    out.unique_papers = papers.size();
    out.unique_items = items.size();
    out.unique_pairs = out.annotations.size();
    return out;
}

AnnotationSet load_annotations(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io, path, "cannot open");
    return load_annotations(in, path);
}

// --- model output ---------------------------------------------------------

namespace {

// End of the balanced {...} span opening at `start`, string-aware, or npos.
std::size_t span_end(std::string_view s, std::size_t start) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = start; i < s.size(); ++i) {
        const char c = s[i];
        if (in_string) {
            if (c == '\\') ++i;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '{') ++depth;
        else if (c == '}' && --depth == 0) return i;
    }
    return std::string_view::npos;
}

}  // namespace

json recover_object(std::string_view raw_text) {
    const std::string whole = text::trim(raw_text);
    {
        json j = json::parse(whole, nullptr, false);
        if (!j.is_discarded() && j.is_object()) return j;
    }
    std::vector<json> found;
    std::size_t i = 0;
    while ((i = raw_text.find('{', i)) != std::string_view::npos) {
        const std::size_t end = span_end(raw_text, i);
        if (end == std::string_view::npos) {
            ++i;
            continue;
        }
        json j = json::parse(raw_text.substr(i, end - i + 1), nullptr, false);
        if (!j.is_discarded() && j.is_object()) {
            found.push_back(std::move(j));
            i = end + 1;
        } else {
            ++i;
        }
    }
    if (found.empty()) throw Error(ErrorCode::unparseable_output, "output", "no JSON object found");
    if (found.size() > 1) {
        throw Error(ErrorCode::unparseable_output, "output",
                    std::to_string(found.size()) + " JSON objects found, expected one");
    }
    return std::move(found.front());
}

AuditResponse parse_model_output(std::string_view raw_text) { return validate_response(recover_object(raw_text)); }

// --- record table ---------------------------------------------------------

namespace {

void escape_into(std::string& out, std::string_view s, bool in_list) {
    for (const char c : s) {
        switch (c) {
            case '\\': out += "\\\\"; break;
            case ',': out += "\\,"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '|':
                if (in_list) {
                    out += "\\|";
                    break;
                }
                [[fallthrough]];
            default: out.push_back(c);
        }
    }
}

std::string encode_list(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out.push_back('|');
        if (items[i].empty()) out += "\\e";
        else escape_into(out, items[i], true);
    }
    return out;
}

std::string unescape(std::string_view s, const std::string& where) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '\\') {
            out.push_back(s[i]);
            continue;
        }
        if (++i == s.size()) throw Error(ErrorCode::format, where, "dangling escape");
        switch (s[i]) {
            case '\\': out.push_back('\\'); break;
            case ',': out.push_back(','); break;
            case '|': out.push_back('|'); break;
            case 'n': out.push_back('\n'); break;
            case 'r': out.push_back('\r'); break;
            case 'e': break;
            default: throw Error(ErrorCode::format, where, std::string("unknown escape \\") + s[i]);
        }
    }
    return out;
}

// Splits on `delim` not preceded by an escaping backslash; pieces stay escaped.
std::vector<std::string_view> split_escaped(std::string_view s, char delim) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\\') {
            ++i;
        } else if (s[i] == delim) {
            out.push_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    out.push_back(s.substr(start));
    return out;
}

std::string opt_real(const std::optional<double>& v) { return v ? text::format_g17(*v) : std::string(); }

std::string header_line() {
    std::string h;
    for (std::size_t i = 0; i < kRecordColumns.size(); ++i) {
        if (i) h.push_back(',');
        h += kRecordColumns[i];
    }
    return h;
}

double need_real(const std::string& cell, std::string_view column, const std::string& where) {
    const auto v = text::parse_double(cell);
    if (!v) throw Error(ErrorCode::format, where, "bad number in " + std::string(column));
    return *v;
}

std::optional<double> opt_real_cell(const std::string& cell, std::string_view column, const std::string& where) {
    if (cell.empty()) return std::nullopt;
    return need_real(cell, column, where);
}

int need_int(const std::string& cell, std::string_view column, const std::string& where) {
    const auto v = text::parse_integer(cell);
    if (!v) throw Error(ErrorCode::format, where, "bad integer in " + std::string(column));
    return static_cast<int>(*v);
}

}  // namespace

std::string records_csv_header() { return header_line(); }

std::string record_to_csv_line(const EvaluationRecord& rec) {
    std::vector<std::string> cells;
    cells.reserve(kRecordColumns.size());
    auto add = [&](std::string_view s) {
        std::string e;
        escape_into(e, s, false);
        cells.push_back(std::move(e));
    };
    add(rec.key.pmcid);
    add(rec.key.consort_item);
    add(rec.key.model_id);
    add(to_string(rec.key.strategy));
    if (rec.response) {
        const auto& r = *rec.response;
        cells.push_back(text::format_g17(r.confidence));
        cells.push_back(text::format_g17(r.uncertainty));
        cells.push_back(std::to_string(r.cognitive_load));
        cells.push_back(std::string(to_string(r.evidence_strength)));
        cells.push_back(text::format_g17(r.keyword_reliance));
        cells.push_back(std::to_string(r.alternative_interpretations));
        add(r.reasoning);
        cells.push_back(encode_list(r.extracted_sentences));
    } else {
        cells.insert(cells.end(), 8, std::string());
    }
    cells.push_back(opt_real(rec.f1));
    cells.push_back(rec.reasoning_score ? std::to_string(*rec.reasoning_score) : std::string());
    cells.push_back(opt_real(rec.compliance_score));
    cells.push_back(opt_real(rec.calibration_gap));
    cells.push_back(std::string(to_string(rec.status)));
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out.push_back(',');
        out += cells[i];
    }
    return out;
}

std::string records_to_csv(const RecordTable& table) {
    std::string out = header_line();
    out.push_back('\n');
    for (const auto& rec : table.records()) {
        out += record_to_csv_line(rec);
        out.push_back('\n');
    }
    return out;
}

RecordTable records_from_csv(std::string_view content, const std::string& source) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < content.size()) {
        auto end = content.find('\n', start);
        if (end == std::string_view::npos) end = content.size();
        auto line = content.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        start = end + 1;
    }
    if (lines.empty() || lines.front() != header_line()) {
        throw Error(ErrorCode::format, source, "header does not match the record table layout");
    }

    RecordTable table;
    for (std::size_t n = 1; n < lines.size(); ++n) {
        if (lines[n].empty()) continue;
        const std::string where = source + ":" + std::to_string(n + 1);
        const auto raw = split_escaped(lines[n], ',');
        if (raw.size() != kRecordColumns.size()) {
            throw Error(ErrorCode::format, where,
                        "expected " + std::to_string(kRecordColumns.size()) + " cells, got " + std::to_string(raw.size()));
        }
        std::vector<std::string> cell;
        for (std::size_t i = 0; i < raw.size(); ++i) {
            cell.push_back(i == 11 ? std::string(raw[i]) : unescape(raw[i], where));
        }

        EvaluationRecord rec;
        try {
            rec.key = {cell[0], cell[1], cell[2], parse_strategy(cell[3])};
            rec.status = parse_status(cell[16]);
        } catch (const Error& e) {
            throw Error(ErrorCode::format, where, e.what());
        }
        if (!cell[4].empty()) {
            AuditResponse r;
            r.confidence = need_real(cell[4], kRecordColumns[4], where);
            r.uncertainty = need_real(cell[5], kRecordColumns[5], where);
            r.cognitive_load = need_int(cell[6], kRecordColumns[6], where);
            try {
                r.evidence_strength = parse_evidence_strength(cell[7]);
            } catch (const Error& e) {
                throw Error(ErrorCode::format, where, e.what());
            }
            r.keyword_reliance = need_real(cell[8], kRecordColumns[8], where);
            r.alternative_interpretations = need_int(cell[9], kRecordColumns[9], where);
            r.reasoning = cell[10];
            if (!cell[11].empty()) {
                for (const auto piece : split_escaped(cell[11], '|')) {
                    r.extracted_sentences.push_back(unescape(piece, where));
                }
            }
            rec.response = std::move(r);
        }
        rec.f1 = opt_real_cell(cell[12], kRecordColumns[12], where);
        if (!cell[13].empty()) rec.reasoning_score = need_int(cell[13], kRecordColumns[13], where);
        rec.compliance_score = opt_real_cell(cell[14], kRecordColumns[14], where);
        rec.calibration_gap = opt_real_cell(cell[15], kRecordColumns[15], where);
        try {
            table.insert(std::move(rec));
        } catch (const Error& e) {
            throw Error(ErrorCode::format, where, e.what());
        }
    }
    return table;
}

void write_records(const RecordTable& table, const std::string& path) { write_file_atomic(path, records_to_csv(table)); }

RecordTable read_records(const std::string& path) {
    std::string content;
    try {
        content = text::read_file(path);
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(ErrorCode::io, path, e.what());
    }
    return records_from_csv(content, path);
}

}  // namespace auditcalib::ingest
