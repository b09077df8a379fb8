#include <expat.h>

#include <array>
#include <cstring>
#include <string>
#include <vector>

#include "auditcalib/error.hpp"
#include "auditcalib/ingest.hpp"
#include "auditcalib/text.hpp"

namespace auditcalib::ingest {

namespace {

constexpr std::array<std::string_view, 8> kSkipped{"fig",   "fig-group", "table-wrap", "table-wrap-group",
                                                   "table", "caption",   "ref-list",   "sub-article"};

bool is_skipped(std::string_view name) {
    for (const auto s : kSkipped) {
        if (s == name) return true;
    }
    return false;
}

// Local name with any namespace prefix removed.
std::string_view local_name(const XML_Char* name) {
    std::string_view n(name);
    const auto colon = n.rfind(':');
    return colon == std::string_view::npos ? n : n.substr(colon + 1);
}

void collapse_into(std::string& out, std::string_view raw) {
    bool space = !out.empty() && out.back() == ' ';
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const unsigned char c = static_cast<unsigned char>(raw[i]);
        const bool nbsp = c == 0xC2 && i + 1 < raw.size() && static_cast<unsigned char>(raw[i + 1]) == 0xA0;
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || nbsp) {
            if (nbsp) ++i;
            if (!space && !out.empty()) out.push_back(' ');
            space = true;
        } else {
            out.push_back(static_cast<char>(c));
            space = false;
        }
    }
}

struct Walker {
    int front_depth = 0;
    int abstract_depth = 0;
    int body_depth = 0;
    int skip_depth = 0;
    int p_depth = 0;
    bool p_in_abstract = false;
    std::string current;
    std::vector<std::string> abstract;
    std::vector<std::string> body;

    void open(std::string_view name) {
        if (skip_depth > 0 || is_skipped(name)) {
            ++skip_depth;
            return;
        }
        if (name == "front") ++front_depth;
        else if (name == "abstract" && front_depth > 0) ++abstract_depth;
        else if (name == "body") ++body_depth;
        else if (name == "p" && (abstract_depth > 0 || body_depth > 0)) {
            if (p_depth++ == 0) {
                p_in_abstract = abstract_depth > 0;
                current.clear();
            } else if (!current.empty() && current.back() != ' ') {
                current.push_back(' ');
            }
        }
    }

    void close(std::string_view name) {
        if (skip_depth > 0) {
            --skip_depth;
            return;
        }
        if (name == "front") --front_depth;
        else if (name == "abstract" && abstract_depth > 0) --abstract_depth;
        else if (name == "body" && body_depth > 0) --body_depth;
        else if (name == "p" && p_depth > 0) {
            if (--p_depth == 0) {
                std::string para = text::trim(current);
                if (!para.empty()) (p_in_abstract ? abstract : body).push_back(std::move(para));
            }
        }
    }

    void characters(std::string_view data) {
        if (skip_depth == 0 && p_depth > 0) collapse_into(current, data);
    }
};

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) out.push_back('\n');
        out += p;
    }
    return out;
}

}  // namespace

Document make_document(std::string pmcid, std::string abstract, std::string body) {
    Document d;
    d.pmcid = std::move(pmcid);
    d.abstract = std::move(abstract);
    d.body = std::move(body);
    std::string full = d.abstract;
    full += kSectionSeparator;
    full += d.body;
    d.combined = std::string(text::utf8_prefix(full, kMaxDocumentChars));
    return d;
}

Document extract_text(std::string_view raw_xml, const std::string& pmcid) {
    Walker walker;
    XML_Parser parser = XML_ParserCreate("UTF-8");
    if (!parser) throw Error(ErrorCode::parse, pmcid, "cannot allocate XML parser");
    XML_SetUserData(parser, &walker);
    XML_SetElementHandler(
        parser,
        [](void* self, const XML_Char* name, const XML_Char**) { static_cast<Walker*>(self)->open(local_name(name)); },
        [](void* self, const XML_Char* name) { static_cast<Walker*>(self)->close(local_name(name)); });
    XML_SetCharacterDataHandler(parser, [](void* self, const XML_Char* s, int len) {
        static_cast<Walker*>(self)->characters(std::string_view(s, static_cast<std::size_t>(len)));
    });
    const auto status = XML_Parse(parser, raw_xml.data(), static_cast<int>(raw_xml.size()), XML_TRUE);
    if (status != XML_STATUS_OK) {
        const std::string message = std::string(XML_ErrorString(XML_GetErrorCode(parser))) + " at line " +
                                    std::to_string(XML_GetCurrentLineNumber(parser));
        XML_ParserFree(parser);
        throw Error(ErrorCode::parse, pmcid, message);
    }
    XML_ParserFree(parser);

    if (walker.abstract.empty() && walker.body.empty()) {
        throw Error(ErrorCode::empty_document, pmcid, "no abstract or body paragraphs");
    }
    return make_document(pmcid, join(walker.abstract), join(walker.body));
}

}  // namespace auditcalib::ingest
