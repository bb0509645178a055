// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace codeact::text
{

/// Strict UTF-8 validation (rejects overlongs, surrogates and code points above U+10FFFF).
inline bool is_valid_utf8(std::string_view s)
{
    auto const* p = reinterpret_cast<unsigned char const*>(s.data());
    auto const* end = p + s.size();
    while (p < end)
    {
        auto const c = *p;
        if (c < 0x80)
        {
            ++p;
            continue;
        }
        int len = 0;
        std::uint32_t cp = 0;
        if ((c & 0xE0) == 0xC0)
        {
            len = 2;
            cp = c & 0x1F;
        }
        else if ((c & 0xF0) == 0xE0)
        {
            len = 3;
            cp = c & 0x0F;
        }
        else if ((c & 0xF8) == 0xF0)
        {
            len = 4;
            cp = c & 0x07;
        }
        else
            return false;
        if (end - p < len)
            return false;
        for (int i = 1; i < len; ++i)
        {
            if ((p[i] & 0xC0) != 0x80)
                return false;
            cp = (cp << 6) | (p[i] & 0x3F);
        }
        if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000))
            return false;
        if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))
            return false;
        p += len;
    }
    return true;
}

inline bool is_continuation(char c)
{
    return (static_cast<unsigned char>(c) & 0xC0) == 0x80;
}

/// Number of code points, counting stray continuation bytes as their own characters.
inline std::size_t char_count(std::string_view s)
{
    std::size_t n = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
        if (!is_continuation(s[i]) || i == 0)
            ++n;
    return n;
}

/// Byte offset of the first `chars` code points.
inline std::size_t byte_offset_of_char(std::string_view s, std::size_t chars)
{
    std::size_t seen = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
    {
        if (i == 0 || !is_continuation(s[i]))
        {
            if (seen == chars)
                return i;
            ++seen;
        }
    }
    return s.size();
}

inline std::string head_chars(std::string_view s, std::size_t chars)
{
    return std::string(s.substr(0, byte_offset_of_char(s, chars)));
}

inline std::string tail_chars(std::string_view s, std::size_t chars)
{
    auto const total = char_count(s);
    if (chars >= total)
        return std::string(s);
    return std::string(s.substr(byte_offset_of_char(s, total - chars)));
}

inline std::string_view trim(std::string_view s)
{
    constexpr auto ws = std::string_view(" \t\r\n\f\v");
    auto const b = s.find_first_not_of(ws);
    if (b == std::string_view::npos)
        return {};
    auto const e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

inline bool is_blank(std::string_view s)
{
    return trim(s).empty();
}

/// Replaces every `{key}` placeholder. Braces not naming a known key are left alone, so
/// instruction text and code containing braces pass through untouched.
template <typename Lookup>
std::string substitute(std::string_view tmpl, Lookup&& lookup)
{
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size())
    {
        if (tmpl[i] == '{')
        {
            auto const close = tmpl.find('}', i + 1);
            if (close != std::string_view::npos)
            {
                if (auto value = lookup(tmpl.substr(i + 1, close - i - 1)))
                {
                    out += *value;
                    i = close + 1;
                    continue;
                }
            }
        }
        out += tmpl[i++];
    }
    return out;
}

} // namespace codeact::text
