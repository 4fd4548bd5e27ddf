#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "error.hpp"
#include "rng.hpp"
#include "utf8.hpp"

namespace ccrnn {

using CharId = std::uint32_t;
using WordId = std::uint32_t;

// ---------------------------------------------------------------------------
// Character vocabulary
// ---------------------------------------------------------------------------

/**
 * Dense ids for the characters of a training text, sorted by code point.
 * Characters never seen in training encode to `unseen_id()` == size().
 */
class CharVocab {
public:
    CharVocab() = default;

    /// Takes a list of distinct code points; ids follow ascending code point order.
    explicit CharVocab(std::vector<char32_t> symbols) : symbols_(std::move(symbols))
    {
        std::sort(symbols_.begin(), symbols_.end());
        if (std::adjacent_find(symbols_.begin(), symbols_.end()) != symbols_.end())
            throw InputError("character vocabulary has duplicate entries");
        for (std::size_t i = 0; i < symbols_.size(); ++i)
            ids_.emplace(symbols_[i], static_cast<CharId>(i));
    }

    /// Alphabet {'0', '1'} used for bit-level modeling.
    static CharVocab bits() { return CharVocab({U'0', U'1'}); }

    std::size_t size() const noexcept { return symbols_.size(); }
    CharId unseen_id() const noexcept { return static_cast<CharId>(symbols_.size()); }

    std::optional<CharId> find(char32_t c) const
    {
        auto it = ids_.find(c);
        if (it == ids_.end())
            return std::nullopt;
        return it->second;
    }

    CharId id_of(char32_t c) const { return find(c).value_or(unseen_id()); }

    /// U+FFFD for the unseen id.
    char32_t char_of(CharId id) const
    {
        if (id == unseen_id())
            return U'�';
        if (id > unseen_id())
            throw IndexError("character id " + std::to_string(id) + " out of range");
        return symbols_[id];
    }

    const std::vector<char32_t>& symbols() const noexcept { return symbols_; }

    friend bool operator==(const CharVocab& a, const CharVocab& b) { return a.symbols_ == b.symbols_; }

private:
    std::vector<char32_t> symbols_;
    std::unordered_map<char32_t, CharId> ids_;
};

inline CharVocab build_char_vocab(std::u32string_view text)
{
    if (text.empty())
        throw InputError("cannot build a character vocabulary from empty text");
    std::vector<char32_t> symbols(text.begin(), text.end());
    std::sort(symbols.begin(), symbols.end());
    symbols.erase(std::unique(symbols.begin(), symbols.end()), symbols.end());
    return CharVocab(std::move(symbols));
}

inline CharVocab build_char_vocab(std::string_view utf8_text)
{
    return build_char_vocab(utf8::decode(utf8_text));
}

// ---------------------------------------------------------------------------
// Word vocabulary
// ---------------------------------------------------------------------------

inline constexpr bool is_space(char32_t c) noexcept
{
    return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\v' || c == U'\f';
}

/// Calls fn(token) for every maximal run of non-whitespace.
template <typename Fn>
void for_each_token(std::string_view text, Fn&& fn)
{
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(static_cast<unsigned char>(text[i])))
            ++i;
        const std::size_t start = i;
        while (i < text.size() && !is_space(static_cast<unsigned char>(text[i])))
            ++i;
        if (i > start)
            fn(text.substr(start, i - start));
    }
}

/**
 * Word ids ordered by descending training frequency (ties lexicographic), with
 * `<UNK>` fixed at id 0. The restricted output vocabulary of size K is
 * therefore the id prefix [0, K).
 */
class WordVocab {
public:
    static constexpr std::string_view unk_token = "<UNK>";
    static constexpr WordId unk_id = 0;

    WordVocab() : words_{std::string(unk_token)} { ids_.emplace(words_[0], unk_id); }

    /// words[0] must be `<UNK>`.
    explicit WordVocab(std::vector<std::string> words) : words_(std::move(words))
    {
        if (words_.empty() || words_[0] != unk_token)
            throw InputError("word vocabulary must start with <UNK>");
        for (std::size_t i = 0; i < words_.size(); ++i) {
            if (!ids_.emplace(words_[i], static_cast<WordId>(i)).second)
                throw InputError("duplicate word in vocabulary: " + words_[i]);
        }
    }

    std::size_t size() const noexcept { return words_.size(); }

    WordId id_of(std::string_view w) const
    {
        auto it = ids_.find(std::string(w));
        return it == ids_.end() ? unk_id : it->second;
    }

    bool contains(std::string_view w) const { return ids_.count(std::string(w)) != 0; }

    const std::string& word_of(WordId id) const
    {
        if (id >= words_.size())
            throw IndexError("word id " + std::to_string(id) + " out of range");
        return words_[id];
    }

    const std::vector<std::string>& words() const noexcept { return words_; }

    friend bool operator==(const WordVocab& a, const WordVocab& b) { return a.words_ == b.words_; }

private:
    std::vector<std::string> words_;
    std::unordered_map<std::string, WordId> ids_;
};

/// `<UNK>` plus the top_k - 1 most frequent whitespace-delimited tokens.
inline WordVocab build_word_vocab(std::string_view text, std::size_t top_k)
{
    if (top_k < 1)
        throw ParameterError("word vocabulary size must be at least 1");
    std::unordered_map<std::string_view, std::size_t> counts;
    for_each_token(text, [&](std::string_view tok) {
        if (tok != WordVocab::unk_token)
            ++counts[tok];
    });
    if (counts.empty()) {
        bool any = false;
        for_each_token(text, [&](std::string_view) { any = true; });
        if (!any)
            throw InputError("cannot build a word vocabulary from empty text");
    }
    std::vector<std::pair<std::string_view, std::size_t>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    std::vector<std::string> words{std::string(WordVocab::unk_token)};
    for (std::size_t i = 0; i < ranked.size() && words.size() < top_k; ++i)
        words.emplace_back(ranked[i].first);
    return WordVocab(std::move(words));
}

/// Fraction of tokens mapped to `<UNK>`; literal `<UNK>` tokens count in the denominator only.
inline double oov_rate(const WordVocab& wv, std::string_view text)
{
    std::size_t total = 0;
    std::size_t oov = 0;
    for_each_token(text, [&](std::string_view tok) {
        ++total;
        if (tok != WordVocab::unk_token && !wv.contains(tok))
            ++oov;
    });
    if (total == 0)
        throw InputError("oov_rate: text has no tokens");
    return static_cast<double>(oov) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// Encoded streams
// ---------------------------------------------------------------------------

/**
 * A corpus as character ids, word ids and the character-to-word map.
 * `words` and `word_of_char` are empty for character-only (and bit) streams.
 */
struct EncodedStream {
    std::vector<CharId> chars;
    std::vector<WordId> words;
    std::vector<std::uint32_t> word_of_char;
    std::size_t unseen = 0; // characters encoded to the reserved unseen id

    std::size_t size() const noexcept { return chars.size(); }
    bool has_words() const noexcept { return !words.empty(); }
};

inline EncodedStream encode_chars(std::u32string_view text, const CharVocab& cv)
{
    EncodedStream s;
    s.chars.reserve(text.size());
    for (char32_t c : text) {
        const CharId id = cv.id_of(c);
        if (id == cv.unseen_id())
            ++s.unseen;
        s.chars.push_back(id);
    }
    return s;
}

inline EncodedStream encode_chars(std::string_view utf8_text, const CharVocab& cv)
{
    return encode_chars(utf8::decode(utf8_text), cv);
}

/**
 * Characters plus word alignment. Whitespace belongs to the token it follows;
 * leading whitespace belongs to word 0.
 */
inline EncodedStream encode_stream(std::string_view utf8_text, const CharVocab& cv, const WordVocab& wv)
{
    const std::u32string text = utf8::decode(utf8_text);
    EncodedStream s = encode_chars(text, cv);
    s.word_of_char.resize(text.size());
    std::string token;
    bool in_token = false;
    std::uint32_t current = 0;
    auto flush = [&] {
        s.words.push_back(wv.id_of(token));
        token.clear();
    };
    for (std::size_t t = 0; t < text.size(); ++t) {
        const char32_t c = text[t];
        if (is_space(c)) {
            if (in_token) {
                flush();
                in_token = false;
            }
        } else {
            if (!in_token) {
                if (!s.words.empty())
                    current = static_cast<std::uint32_t>(s.words.size());
                in_token = true;
            }
            utf8::append(token, c);
        }
        s.word_of_char[t] = current;
    }
    if (in_token)
        flush();
    if (s.words.empty() && !text.empty())
        throw InputError("text contains no words");
    return s;
}

inline std::string decode_chars(std::span<const CharId> ids, const CharVocab& cv)
{
    std::string out;
    out.reserve(ids.size());
    for (CharId id : ids)
        utf8::append(out, cv.char_of(id));
    return out;
}

// ---------------------------------------------------------------------------
// Bit mode
// ---------------------------------------------------------------------------

struct BitStream {
    static constexpr std::size_t bits_per_char = 8;
    std::vector<std::uint8_t> bits;
};

/// Each character (code point <= 255) becomes 8 bits, most significant first.
inline BitStream encode_bits(std::string_view utf8_text)
{
    const std::u32string text = utf8::decode(utf8_text);
    BitStream out;
    out.bits.reserve(text.size() * 8);
    for (std::size_t t = 0; t < text.size(); ++t) {
        const char32_t c = text[t];
        if (c > 0xFF)
            throw InputError("bit mode requires 8-bit characters; U+" + std::to_string(c) +
                             " at position " + std::to_string(t));
        for (int b = 7; b >= 0; --b)
            out.bits.push_back(static_cast<std::uint8_t>((c >> b) & 1u));
    }
    return out;
}

inline std::string decode_bits(const BitStream& bs)
{
    if (bs.bits.size() % 8 != 0)
        throw InputError("bit stream length is not a multiple of 8");
    std::string out;
    for (std::size_t i = 0; i < bs.bits.size(); i += 8) {
        char32_t c = 0;
        for (std::size_t b = 0; b < 8; ++b)
            c = (c << 1) | (bs.bits[i + b] & 1u);
        utf8::append(out, c);
    }
    return out;
}

/// Bits as a character stream over CharVocab::bits() (id 0 = bit 0, id 1 = bit 1).
inline EncodedStream to_stream(const BitStream& bs)
{
    EncodedStream s;
    s.chars.assign(bs.bits.begin(), bs.bits.end());
    return s;
}

// ---------------------------------------------------------------------------
// Line splitting
// ---------------------------------------------------------------------------

struct SplitSizes {
    std::size_t train = 60000;
    std::size_t valid = 10000;
    std::size_t test = 10000;
};

struct LineSplit {
    std::vector<std::string> train;
    std::vector<std::string> valid;
    std::vector<std::string> test;
};

/// Fisher-Yates permutation of line indices (draws from Rng::uniform_index), then partition in order.
inline LineSplit split_lines(const std::vector<std::string>& lines, std::uint64_t seed, SplitSizes sizes = {})
{
    const std::size_t need = sizes.train + sizes.valid + sizes.test;
    if (lines.size() < need)
        throw InputError("corpus has " + std::to_string(lines.size()) + " lines, split needs " +
                         std::to_string(need));
    std::vector<std::size_t> order(lines.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    Rng rng(seed);
    for (std::size_t i = order.size(); i > 1; --i) {
        const std::size_t j = rng.uniform_index(i);
        std::swap(order[i - 1], order[j]);
    }
    LineSplit out;
    auto take = [&](std::vector<std::string>& dst, std::size_t from, std::size_t n) {
        dst.reserve(n);
        for (std::size_t i = from; i < from + n; ++i)
            dst.push_back(lines[order[i]]);
    };
    take(out.train, 0, sizes.train);
    take(out.valid, sizes.train, sizes.valid);
    take(out.test, sizes.train + sizes.valid, sizes.test);
    return out;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline std::string read_text_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad())
        throw IoError("error reading " + path.string());
    return data;
}

inline void write_text_file(const std::filesystem::path& path, std::string_view data)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out)
        throw IoError("error writing " + path.string());
}

/// Split on '\n'; a trailing newline does not produce an empty last line.
inline std::vector<std::string> split_text_lines(std::string_view text)
{
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        const std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.emplace_back(text.substr(start));
            break;
        }
        lines.emplace_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

inline std::string join_lines(const std::vector<std::string>& lines)
{
    std::string out;
    for (const auto& l : lines) {
        out += l;
        out += '\n';
    }
    return out;
}

// Vocab files hold one entry per line. Characters are escaped so that
// whitespace symbols stay on their own line: \\ \n \t \r \s (space), \xHH.
inline std::string escape_char(char32_t c)
{
    switch (c) {
    case U'\\': return "\\\\";
    case U'\n': return "\\n";
    case U'\t': return "\\t";
    case U'\r': return "\\r";
    case U' ': return "\\s";
    default: break;
    }
    if (c < 0x20 || c == 0x7F) {
        static constexpr char hex[] = "0123456789abcdef";
        return std::string("\\x") + hex[(c >> 4) & 0xF] + hex[c & 0xF];
    }
    std::string out;
    utf8::append(out, c);
    return out;
}

inline char32_t unescape_char(std::string_view s)
{
    if (s.size() >= 2 && s[0] == '\\') {
        if (s == "\\\\") return U'\\';
        if (s == "\\n") return U'\n';
        if (s == "\\t") return U'\t';
        if (s == "\\r") return U'\r';
        if (s == "\\s") return U' ';
        if (s.size() == 4 && s[1] == 'x')
            return static_cast<char32_t>(std::stoul(std::string(s.substr(2)), nullptr, 16));
        throw InputError("bad escape in vocabulary file: " + std::string(s));
    }
    const std::u32string cp = utf8::decode(s);
    if (cp.size() != 1)
        throw InputError("vocabulary line is not a single character: " + std::string(s));
    return cp[0];
}

inline std::string format_char_vocab(const CharVocab& cv)
{
    std::string out;
    for (char32_t c : cv.symbols()) {
        out += escape_char(c);
        out += '\n';
    }
    return out;
}

inline CharVocab parse_char_vocab(std::string_view text)
{
    std::vector<char32_t> symbols;
    for (const auto& line : split_text_lines(text))
        symbols.push_back(unescape_char(line));
    return CharVocab(std::move(symbols));
}

inline std::string format_word_vocab(const WordVocab& wv)
{
    std::string out;
    for (const auto& w : wv.words()) {
        out += w;
        out += '\n';
    }
    return out;
}

inline WordVocab parse_word_vocab(std::string_view text)
{
    return WordVocab(split_text_lines(text));
}

} // namespace ccrnn
