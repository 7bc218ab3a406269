// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace lmaudit {

/// Dense id -> token string table exported from a tokenizer.
/// Duplicate strings are allowed; real vocabularies contain them.
class Vocabulary {
public:
    Vocabulary() = default;
    explicit Vocabulary(std::vector<std::string> entries) : entries_(std::move(entries)) {}

    std::size_t size() const noexcept { return entries_.size(); }
    const std::vector<std::string>& entries() const noexcept { return entries_; }
    const std::string& operator[](std::size_t id) const { return entries_[id]; }

private:
    std::vector<std::string> entries_;
};

/// Accepts either a JSON array of strings (index = id) or an object of
/// {"token": id} pairs. Object form is inverted; ids with no token become "".
Vocabulary parse_vocabulary(std::string_view json_text);
Vocabulary load_vocabulary(const std::filesystem::path& path);

/// Printable form of a raw token string.
///
/// Control characters (C0, DEL, C1), U+FFFD and the escape opener U+27E8 are
/// written as `⟨U+XXXX⟩`; bytes that are not valid UTF-8 as `⟨0xHH⟩`; the
/// empty string as `⟨empty⟩`. Everything else, including subword space
/// markers such as U+2581 and U+0120, passes through verbatim.
std::string escape_token(std::string_view token);

/// escape_token of the id's string, or `<unmapped:ID>` past the end of the table.
std::string render_token(const Vocabulary& vocab, std::uint64_t id);

} // namespace lmaudit
