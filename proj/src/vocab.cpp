// SPDX-License-Identifier: Apache-2.0
#include "lmaudit/vocab.hpp"

#include <fstream>
#include <optional>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "lmaudit/errors.hpp"

namespace lmaudit {

namespace {

using nlohmann::json;

// Upper bound on ids in object form; far above any real vocabulary and keeps
// a single stray id from forcing a huge allocation.
constexpr std::uint64_t kMaxTokenId = std::uint64_t{1} << 26;

[[noreturn]] void fail(ErrorKind kind, const std::string& message) {
    throw Error(Stage::vocab, kind, message);
}

struct Decoded {
    char32_t code_point;
    std::size_t length;
};

// Strict UTF-8 decode of one scalar value; rejects overlongs and surrogates.
std::optional<Decoded> decode_utf8(std::string_view s, std::size_t pos) {
    const auto byte = [&](std::size_t i) { return static_cast<unsigned char>(s[pos + i]); };
    const unsigned char lead = byte(0);
    if (lead < 0x80) {
        return Decoded{lead, 1};
    }
    std::size_t length = 0;
    char32_t cp = 0;
    char32_t min = 0;
    if ((lead & 0xE0) == 0xC0) {
        length = 2, cp = lead & 0x1F, min = 0x80;
    } else if ((lead & 0xF0) == 0xE0) {
        length = 3, cp = lead & 0x0F, min = 0x800;
    } else if ((lead & 0xF8) == 0xF0) {
        length = 4, cp = lead & 0x07, min = 0x10000;
    } else {
        return std::nullopt;
    }
    if (pos + length > s.size()) {
        return std::nullopt;
    }
    for (std::size_t i = 1; i < length; ++i) {
        if ((byte(i) & 0xC0) != 0x80) return std::nullopt;
        cp = (cp << 6) | (byte(i) & 0x3F);
    }
    if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
        return std::nullopt;
    }
    return Decoded{cp, length};
}

bool needs_escape(char32_t cp) {
    return cp < 0x20 || cp == 0x7F || (cp >= 0x80 && cp <= 0x9F) || cp == 0xFFFD || cp == 0x27E8;
}

} // namespace

Vocabulary parse_vocabulary(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::malformed_vocab, e.what());
    }

    std::vector<std::string> entries;
    if (doc.is_array()) {
        entries.reserve(doc.size());
        for (std::size_t i = 0; i < doc.size(); ++i) {
            if (!doc[i].is_string()) {
                fail(ErrorKind::malformed_vocab, fmt::format("entry {} is not a string", i));
            }
            entries.push_back(doc[i].get<std::string>());
        }
        return Vocabulary(std::move(entries));
    }
    if (!doc.is_object()) {
        fail(ErrorKind::malformed_vocab, "expected an array of strings or an object of token ids");
    }

    std::vector<std::pair<std::uint64_t, std::string>> pairs;
    pairs.reserve(doc.size());
    std::uint64_t max_id = 0;
    for (const auto& [token, value] : doc.items()) {
        if (!value.is_number_integer()) {
            fail(ErrorKind::invalid_token_id, fmt::format("id of '{}' is not an integer", token));
        }
        if (!value.is_number_unsigned() && value.get<std::int64_t>() < 0) {
            fail(ErrorKind::invalid_token_id, fmt::format("id of '{}' is negative", token));
        }
        const auto id = value.get<std::uint64_t>();
        if (id >= kMaxTokenId) {
            fail(ErrorKind::invalid_token_id, fmt::format("id {} of '{}' is implausibly large", id, token));
        }
        max_id = std::max(max_id, id);
        pairs.emplace_back(id, token);
    }

    if (!pairs.empty()) {
        entries.resize(max_id + 1);
        std::vector<bool> seen(max_id + 1, false);
        for (auto& [id, token] : pairs) {
            if (seen[id]) {
                fail(ErrorKind::duplicate_token_id, fmt::format("id {} is assigned twice", id));
            }
            seen[id] = true;
            entries[id] = std::move(token);
        }
    }
    return Vocabulary(std::move(entries));
}

Vocabulary load_vocabulary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorKind::malformed_vocab, fmt::format("cannot open '{}'", path.string()));
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_vocabulary(buffer.str());
}

std::string escape_token(std::string_view token) {
    if (token.empty()) {
        return "⟨empty⟩";
    }
    std::string out;
    out.reserve(token.size());
    for (std::size_t pos = 0; pos < token.size();) {
        const auto decoded = decode_utf8(token, pos);
        if (!decoded) {
            out += fmt::format("⟨0x{:02X}⟩", static_cast<unsigned char>(token[pos]));
            ++pos;
            continue;
        }
        if (needs_escape(decoded->code_point)) {
            out += fmt::format("⟨U+{:04X}⟩", static_cast<std::uint32_t>(decoded->code_point));
        } else {
            out.append(token.substr(pos, decoded->length));
        }
        pos += decoded->length;
    }
    return out;
}

std::string render_token(const Vocabulary& vocab, std::uint64_t id) {
    if (id >= vocab.size()) {
        return fmt::format("<unmapped:{}>", id);
    }
    return escape_token(vocab[id]);
}

} // namespace lmaudit
