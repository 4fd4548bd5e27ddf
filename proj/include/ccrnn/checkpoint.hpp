#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "corpus.hpp"
#include "model.hpp"
#include "trainer.hpp"

namespace ccrnn {

/// Everything needed to evaluate, sample from, or resume a trained model.
struct Checkpoint {
    TrainConfig config;
    CharVocab chars;
    WordVocab words; // just <UNK> unless the model is mixed
    AnyModel model;
    TrainState state;
};

/*
 * File layout (all integers little-endian):
 *
 *   "CCRNN"                 5 bytes
 *   version                 1 byte
 *   header length           u64
 *   header                  UTF-8 text, sections below
 *   matrix data             f64 per entry, matrices in header order, row-major
 *   checksum                u64, FNV-1a over every byte from the header length on
 *
 * Header sections, each opened by a `== name ==` line (words never contain
 * spaces, so the marker cannot collide with an entry): config (key = value),
 * state (key = value), chars (one decimal code point per line), words (one
 * word per line), ngram (NGramIndex::serialize() text), matrices
 * (`<name> <rows> <cols>`).
 */
namespace checkpoint_format {

inline constexpr std::string_view magic = "CCRNN";
inline constexpr std::uint8_t version = 1;

inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL)
{
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline void put_u64(std::string& out, std::uint64_t v)
{
    for (int i = 0; i < 8; ++i)
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint64_t get_u64(std::string_view in, std::size_t at)
{
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= std::uint64_t(static_cast<unsigned char>(in[at + i])) << (8 * i);
    return v;
}

} // namespace checkpoint_format

inline std::string serialize_checkpoint(const Checkpoint& ck)
{
    using namespace checkpoint_format;
    std::ostringstream h;
    h << "== config ==\n";
    for (const auto& [k, v] : ck.config.to_key_values())
        h << k << " = " << v << '\n';
    h << "== state ==\n"
      << "epoch = " << ck.state.epoch << '\n'
      << "lr = " << format_double(ck.state.lr) << '\n'
      << "best-valid = " << format_double(ck.state.best_valid) << '\n'
      << "decay-active = " << (ck.state.decay_active ? "true" : "false") << '\n'
      << "decays = " << ck.state.decays << '\n'
      << "rng = " << ck.state.rng[0] << ' ' << ck.state.rng[1] << ' ' << ck.state.rng[2] << ' ' << ck.state.rng[3]
      << '\n';
    h << "== chars ==\n";
    for (char32_t c : ck.chars.symbols())
        h << static_cast<std::uint32_t>(c) << '\n';
    h << "== words ==\n";
    for (const auto& w : ck.words.words())
        h << w << '\n';
    if (const auto* cond = std::get_if<CondRnn>(&ck.model))
        h << "== ngram ==\n" << cond->index.serialize();
    h << "== matrices ==\n";
    std::visit(
        [&](const auto& m) {
            for (const auto& [name, mat] : m.params())
                h << name << ' ' << mat->rows() << ' ' << mat->cols() << '\n';
        },
        ck.model);
    const std::string header = h.str();

    std::string body;
    put_u64(body, header.size());
    body += header;
    std::visit(
        [&](const auto& m) {
            for (const auto& [name, mat] : m.params())
                for (double v : mat->flat())
                    put_u64(body, std::bit_cast<std::uint64_t>(v));
        },
        ck.model);

    std::string out(magic);
    out.push_back(static_cast<char>(version));
    out += body;
    put_u64(out, fnv1a(body));
    return out;
}

namespace detail {

struct HeaderSections {
    std::vector<std::pair<std::string, std::string>> config;
    std::vector<std::pair<std::string, std::string>> state;
    std::vector<std::string> chars;
    std::vector<std::string> words;
    std::string ngram;
    std::vector<std::string> matrices;
};

inline HeaderSections split_header(std::string_view header)
{
    HeaderSections s;
    std::string section;
    for (const auto& line : split_text_lines(header)) {
        if (line.size() > 6 && line.starts_with("== ") && line.ends_with(" ==")) {
            section = line.substr(3, line.size() - 6);
            continue;
        }
        if (section == "config" || section == "state") {
            auto kv = parse_key_values(line);
            auto& dst = section == "config" ? s.config : s.state;
            dst.insert(dst.end(), kv.begin(), kv.end());
        } else if (section == "chars") {
            s.chars.push_back(line);
        } else if (section == "words") {
            s.words.push_back(line);
        } else if (section == "ngram") {
            s.ngram += line;
            s.ngram += '\n';
        } else if (section == "matrices") {
            s.matrices.push_back(line);
        } else {
            throw InputError("unexpected header line outside a section");
        }
    }
    return s;
}

/// Entry count declared in the matrices section, or nullopt if it cannot be read.
inline std::optional<std::uint64_t> declared_entries(std::string_view header)
{
    bool in_matrices = false;
    std::uint64_t total = 0;
    for (const auto& line : split_text_lines(header)) {
        if (line.starts_with("== ") && line.ends_with(" ==")) {
            in_matrices = line == "== matrices ==";
            continue;
        }
        if (!in_matrices)
            continue;
        std::istringstream is(line);
        std::string name;
        std::uint64_t rows = 0, cols = 0;
        if (!(is >> name >> rows >> cols))
            return std::nullopt;
        total += rows * cols;
    }
    return total;
}

} // namespace detail

/// Parse checkpoint bytes. When `expected` is set, a model of another kind is rejected.
inline Checkpoint parse_checkpoint(std::string_view bytes, std::optional<ModelKind> expected = std::nullopt)
{
    using namespace checkpoint_format;
    using Code = CheckpointError::Code;
    const std::size_t prefix = magic.size() + 1;
    if (bytes.size() < magic.size() || bytes.substr(0, magic.size()) != magic)
        throw CheckpointError(Code::bad_magic, "not a checkpoint file (bad magic)");
    if (bytes.size() < prefix + 8 + 8)
        throw CheckpointError(Code::truncated, "checkpoint is truncated");
    const auto ver = static_cast<std::uint8_t>(bytes[magic.size()]);
    if (ver != version)
        throw CheckpointError(Code::version_mismatch, "checkpoint format version " + std::to_string(ver) +
                                                          " is not supported (expected " +
                                                          std::to_string(version) + ")");
    const std::uint64_t header_len = get_u64(bytes, prefix);
    if (header_len > bytes.size() - prefix - 16)
        throw CheckpointError(Code::truncated, "checkpoint is truncated");
    const auto entries = detail::declared_entries(bytes.substr(prefix + 8, header_len));
    if (entries && bytes.size() - prefix - 16 - header_len < *entries * 8)
        throw CheckpointError(Code::truncated, "checkpoint is truncated");
    const std::string_view body = bytes.substr(prefix, bytes.size() - prefix - 8);
    if (fnv1a(body) != get_u64(bytes, bytes.size() - 8))
        throw CheckpointError(Code::checksum, "checkpoint checksum mismatch");

    Checkpoint ck;
    detail::HeaderSections sec;
    try {
        sec = detail::split_header(body.substr(8, header_len));
        for (const auto& [k, v] : sec.config)
            ck.config.set(k, v);
        for (const auto& [k, v] : sec.state) {
            if (k == "epoch") ck.state.epoch = parse_uint(v, k);
            else if (k == "lr") ck.state.lr = parse_double(v, k);
            else if (k == "best-valid") ck.state.best_valid = v == "inf" ? std::numeric_limits<double>::infinity() : parse_double(v, k);
            else if (k == "decay-active") ck.state.decay_active = parse_bool(v, k);
            else if (k == "decays") ck.state.decays = parse_uint(v, k);
            else if (k == "rng") {
                std::istringstream is(v);
                for (auto& w : ck.state.rng)
                    is >> w;
                if (!is)
                    throw ConfigError("bad rng state");
            } else {
                throw ConfigError("unknown state key '" + k + "'");
            }
        }
        std::vector<char32_t> symbols;
        for (const auto& c : sec.chars)
            symbols.push_back(static_cast<char32_t>(parse_uint(c, "char")));
        ck.chars = CharVocab(std::move(symbols));
        ck.words = sec.words.empty() ? WordVocab() : WordVocab(sec.words);
    } catch (const Error& e) {
        throw CheckpointError(Code::malformed, std::string("malformed checkpoint header: ") + e.what());
    }

    const ModelKind kind = ck.config.model_kind;
    if (expected && *expected != kind)
        throw CheckpointError(Code::kind_mismatch, "checkpoint holds a " + to_string(kind) + " model, expected " +
                                                        to_string(*expected));

    struct Decl {
        std::string name;
        std::size_t rows, cols;
    };
    std::vector<Decl> decls;
    std::size_t total = 0;
    for (const auto& line : sec.matrices) {
        std::istringstream is(line);
        Decl d;
        if (!(is >> d.name >> d.rows >> d.cols))
            throw CheckpointError(Code::malformed, "bad matrix declaration: " + line);
        total += d.rows * d.cols;
        decls.push_back(d);
    }
    const std::size_t data_at = 8 + header_len;
    if (body.size() - data_at != total * 8)
        throw CheckpointError(Code::truncated, "checkpoint matrix data has the wrong length");

    std::size_t offset = data_at;
    std::vector<Matrix> mats;
    for (const auto& d : decls) {
        std::vector<double> data(d.rows * d.cols);
        for (auto& v : data) {
            v = std::bit_cast<double>(get_u64(body, offset));
            offset += 8;
        }
        mats.emplace_back(d.rows, d.cols, std::move(data));
    }

    auto expect_names = [&](const std::vector<std::string>& names) {
        if (decls.size() != names.size())
            throw CheckpointError(Code::malformed, "unexpected number of matrices");
        for (std::size_t i = 0; i < names.size(); ++i)
            if (decls[i].name != names[i])
                throw CheckpointError(Code::malformed, "unexpected matrix " + decls[i].name);
    };
    auto shape_ok = [&](bool ok) {
        if (!ok)
            throw CheckpointError(Code::malformed, "inconsistent matrix shapes");
    };
    const std::size_t d = ck.chars.size();
    switch (kind) {
    case ModelKind::plain: {
        expect_names({"A", "R", "U"});
        CharRnn m;
        m.A = std::move(mats[0]);
        m.R = std::move(mats[1]);
        m.U = std::move(mats[2]);
        const std::size_t h = m.R.rows();
        shape_ok(m.A.rows() == h && m.A.cols() == d + 1 && m.R.cols() == h && m.U.rows() == d && m.U.cols() == h);
        ck.model = std::move(m);
        break;
    }
    case ModelKind::mixed: {
        expect_names({"A", "R", "U", "Q", "Aw", "Rw", "Uw"});
        MixedRnn m;
        m.A = std::move(mats[0]);
        m.R = std::move(mats[1]);
        m.U = std::move(mats[2]);
        m.Q = std::move(mats[3]);
        m.Aw = std::move(mats[4]);
        m.Rw = std::move(mats[5]);
        m.Uw = std::move(mats[6]);
        m.lambda = ck.config.lambda;
        const std::size_t h = m.R.rows(), g = m.Rw.rows();
        shape_ok(m.A.rows() == h && m.A.cols() == d + 1 && m.R.cols() == h && m.U.rows() == d &&
                 m.U.cols() == h && m.Q.rows() == h && m.Q.cols() == g && m.Aw.rows() == g &&
                 m.Aw.cols() == ck.words.size() && m.Rw.cols() == g && m.Uw.cols() == g &&
                 m.Uw.rows() <= m.Aw.cols());
        ck.model = std::move(m);
        break;
    }
    case ModelKind::conditional: {
        CondRnn m;
        try {
            m.index = NGramIndex::deserialize(sec.ngram);
        } catch (const Error& e) {
            throw CheckpointError(Code::malformed, std::string("bad n-gram index: ") + e.what());
        }
        std::vector<std::string> names{"A", "R"};
        for (std::size_t i = 0; i < m.index.size(); ++i)
            names.push_back("bank" + std::to_string(i));
        expect_names(names);
        m.A = std::move(mats[0]);
        m.R = std::move(mats[1]);
        const std::size_t h = m.R.rows();
        shape_ok(m.A.rows() == h && m.A.cols() == d + 1 && m.R.cols() == h);
        for (std::size_t i = 2; i < mats.size(); ++i) {
            shape_ok(mats[i].rows() == d && mats[i].cols() == h);
            m.bank.push_back(std::move(mats[i]));
        }
        ck.model = std::move(m);
        break;
    }
    }
    return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path)
{
    write_text_file(path, serialize_checkpoint(ck));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<ModelKind> expected = std::nullopt)
{
    return parse_checkpoint(read_text_file(path), expected);
}

} // namespace ccrnn
