// ccrnn: train, evaluate and sample character-level RNN language models.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 I/O or data error,
// 3 training divergence.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <ccrnn/ccrnn.hpp>

using namespace ccrnn;

namespace {

enum Exit { ok = 0, usage = 1, io = 2, diverged = 3 };

struct UsageError : Error {
    using Error::Error;
};

// ---------------------------------------------------------------------------
// build-vocab
// ---------------------------------------------------------------------------

struct BuildVocabArgs {
    std::string train, out, valid;
    std::size_t topk = 10000;
};

int run_build_vocab(const BuildVocabArgs& a)
{
    const std::string text = read_text_file(a.train);
    const auto cv = build_char_vocab(std::string_view(text));
    const auto wv = build_word_vocab(text, a.topk);
    std::optional<double> oov;
    if (!a.valid.empty())
        oov = oov_rate(wv, read_text_file(a.valid));
    write_text_file(a.out + ".chars", format_char_vocab(cv));
    write_text_file(a.out + ".words", format_word_vocab(wv));
    std::cout << "d\t" << cv.size() << "\nk\t" << wv.size() << '\n';
    if (oov)
        std::cout << "oov_rate\t" << format_double(*oov) << '\n';
    return ok;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string config_file, train, valid, ckpt, log, ngram_dump;
    std::string model = "plain";
    std::size_t hidden = 0, word_hidden = 0, word_topk = 0, word_out = 0, n_max = 0, bptt = 0, max_epochs = 0,
                max_decays = 0;
    std::uint64_t theta = 0, seed = 0;
    double lambda = 0, lr = 0, lr_decay = 0, clip = 0;
    bool bits = false;
    std::vector<std::pair<std::string, CLI::Option*>> flags; // config key -> option
};

/// Config file first, then every flag given on the command line.
TrainConfig resolve_config(const TrainArgs& a)
{
    TrainConfig c;
    if (!a.config_file.empty())
        for (const auto& [k, v] : parse_key_values(read_text_file(a.config_file)))
            c.set(k, v);
    for (const auto& [key, opt] : a.flags) {
        if (opt->count() == 0)
            continue;
        if (key == "bits")
            c.bits = a.bits;
        else
            c.set(key, opt->results().back());
    }
    auto given = [&](std::string_view key) {
        for (const auto& [k, opt] : a.flags)
            if (k == key)
                return opt->count() > 0;
        return false;
    };
    if (c.model_kind != ModelKind::mixed)
        for (const char* k : {"word-hidden", "word-topk", "word-out", "lambda"})
            if (given(k))
                throw UsageError(std::string("--") + k + " only applies to --model mixed");
    if (c.model_kind != ModelKind::conditional) {
        for (const char* k : {"ngram-cutoff", "ngram-max"})
            if (given(k))
                throw UsageError(std::string("--") + k + " only applies to --model cond");
        if (!a.ngram_dump.empty())
            throw UsageError("--ngram-dump only applies to --model cond");
    }
    c.validate();
    return c;
}

struct Data {
    CharVocab chars;
    WordVocab words;
    EncodedStream train, valid;
};

Data load_training_data(const TrainConfig& c, const std::string& train_path, const std::string& valid_path)
{
    const std::string train = read_text_file(train_path);
    const std::string valid = read_text_file(valid_path);
    Data d;
    if (c.bits) {
        d.chars = CharVocab::bits();
        d.train = to_stream(encode_bits(train));
        d.valid = to_stream(encode_bits(valid));
        return d;
    }
    d.chars = build_char_vocab(std::string_view(train));
    if (c.model_kind == ModelKind::mixed) {
        d.words = build_word_vocab(train, c.word_topk);
        d.train = encode_stream(train, d.chars, d.words);
        d.valid = encode_stream(valid, d.chars, d.words);
    } else {
        d.train = encode_chars(std::string_view(train), d.chars);
        d.valid = encode_chars(std::string_view(valid), d.chars);
    }
    return d;
}

int run_train(const TrainArgs& a)
{
    const TrainConfig c = resolve_config(a);
    const Data data = load_training_data(c, a.train, a.valid);
    if (data.train.size() < 2)
        throw InputError("training text must hold at least two symbols");
    if (data.valid.size() < 2)
        throw InputError("validation text must hold at least two symbols");

    std::optional<NGramIndex> index;
    if (c.model_kind == ModelKind::conditional) {
        index = NGramIndex::build(data.train.chars, c.theta, c.n_max);
        std::cerr << "n-gram contexts: " << index->size() << '\n';
        if (!a.ngram_dump.empty()) {
            std::ostringstream os;
            index->dump(os, data.chars);
            write_text_file(a.ngram_dump, os.str());
        }
    }
    const AnyModel init = init_model(c, data.chars.size(), data.words.size(), index ? &*index : nullptr);

    // In bit mode the log reports bits per character (8 x bits per bit).
    const double unit = c.bits ? 8.0 : 1.0;
    std::ofstream log;
    if (!a.log.empty()) {
        log.open(a.log, std::ios::binary);
        if (!log)
            throw IoError("cannot open " + a.log + " for writing");
        log << epoch_log_header << '\n' << std::flush;
    }
    auto on_epoch = [&](EpochLog e) {
        e.train_bpc *= unit;
        e.valid_bpc *= unit;
        const std::string row = format_epoch_log(e);
        std::cerr << row << '\n';
        if (log.is_open())
            log << row << '\n' << std::flush;
    };

    auto save = [&](const FitResult& r) {
        save_checkpoint(Checkpoint{c, data.chars, data.words, r.best, r.state}, a.ckpt);
    };
    FitResult result;
    try {
        result = fit(c, init, data.train, data.valid, on_epoch);
    } catch (const FitDiverged& e) {
        save(e.partial());
        throw;
    }
    save(result);

    if (c.bits) {
        std::cout << "valid_bpc\t" << format_double(bpc_from_bpb(result.best_valid_bpc)) << '\n';
        std::cout << "valid_bpb\t" << format_double(result.best_valid_bpc) << '\n';
    } else {
        std::cout << "valid_bpc\t" << format_double(result.best_valid_bpc) << '\n';
    }
    return ok;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string ckpt, text;
    bool bits = false;
    std::size_t shards = 1;
};

EncodedStream encode_for(const Checkpoint& ck, const std::string& text)
{
    if (ck.config.bits)
        return to_stream(encode_bits(text));
    if (kind_of(ck.model) == ModelKind::mixed)
        return encode_stream(text, ck.chars, ck.words);
    return encode_chars(std::string_view(text), ck.chars);
}

int run_eval(const EvalArgs& a)
{
    const Checkpoint ck = load_checkpoint(a.ckpt);
    if (a.bits && !ck.config.bits)
        throw UsageError("--bits given but the checkpoint was trained on characters");
    const EncodedStream s = encode_for(ck, read_text_file(a.text));
    const EvalReport r =
        a.shards > 1 ? evaluate_sharded(ck.model, s, a.shards, ck.config.bits) : evaluate(ck.model, s, ck.config.bits);
    std::cout << eval_report_header << '\n' << format_eval_report(r) << '\n';
    return ok;
}

// ---------------------------------------------------------------------------
// sample
// ---------------------------------------------------------------------------

struct SampleArgs {
    std::string ckpt;
    std::size_t length = 200;
    std::uint64_t seed = 1;
    double temperature = 1.0;
};

int run_sample(const SampleArgs& a)
{
    if (!(a.temperature > 0))
        throw UsageError("--temperature must be positive");
    const Checkpoint ck = load_checkpoint(a.ckpt);
    Rng rng(derive_seed(a.seed, SeedStream::sample));
    std::cout << sample_text(ck.model, ck.chars, ck.words, rng, a.length, a.temperature) << std::flush;
    return ok;
}

// ---------------------------------------------------------------------------
// split
// ---------------------------------------------------------------------------

struct SplitArgs {
    std::string corpus, out_prefix;
    std::uint64_t seed = 1;
    std::vector<std::size_t> sizes;
};

int run_split(const SplitArgs& a)
{
    SplitSizes sizes;
    if (!a.sizes.empty())
        sizes = SplitSizes{a.sizes[0], a.sizes[1], a.sizes[2]};
    const auto lines = split_text_lines(read_text_file(a.corpus));
    const auto sp = split_lines(lines, derive_seed(a.seed, SeedStream::split), sizes);
    write_text_file(a.out_prefix + ".train", join_lines(sp.train));
    write_text_file(a.out_prefix + ".valid", join_lines(sp.valid));
    write_text_file(a.out_prefix + ".test", join_lines(sp.test));
    std::cout << "train\t" << sp.train.size() << "\nvalid\t" << sp.valid.size() << "\ntest\t" << sp.test.size()
              << '\n';
    return ok;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Character-level RNN language models: plain, word-conditioned and n-gram-conditioned."};
    app.require_subcommand(1);

    BuildVocabArgs bv;
    auto* cmd_vocab = app.add_subcommand("build-vocab", "Write character and word vocabularies of a corpus");
    cmd_vocab->add_option("--train", bv.train, "Training text")->required();
    cmd_vocab->add_option("--out", bv.out, "Output prefix; writes PREFIX.chars and PREFIX.words")->required();
    cmd_vocab->add_option("--word-topk", bv.topk, "Word vocabulary size including <UNK>")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd_vocab->add_option("--valid", bv.valid, "Report the OOV rate of this text");

    TrainArgs ta;
    auto* cmd_train = app.add_subcommand("train", "Train a model and write its best checkpoint");
    cmd_train->add_option("--config", ta.config_file, "key = value file; flags override it");
    cmd_train->add_option("--train", ta.train, "Training text")->required();
    cmd_train->add_option("--valid", ta.valid, "Validation text")->required();
    cmd_train->add_option("--ckpt", ta.ckpt, "Checkpoint output path")->required();
    cmd_train->add_option("--log", ta.log, "Per-epoch TSV log");
    cmd_train->add_option("--ngram-dump", ta.ngram_dump, "Write the n-gram index as TSV (cond only)");
    auto flag = [&](const std::string& key, auto& target, const std::string& help) {
        ta.flags.emplace_back(key, cmd_train->add_option("--" + key, target, help));
    };
    flag("model", ta.model, "plain, mixed or cond");
    flag("hidden", ta.hidden, "Character hidden size m");
    flag("word-hidden", ta.word_hidden, "Word hidden size g (mixed)");
    flag("word-topk", ta.word_topk, "Word vocabulary size including <UNK> (mixed)");
    flag("word-out", ta.word_out, "Restricted word output vocabulary including <UNK> (mixed)");
    flag("lambda", ta.lambda, "Weight of the character loss (mixed)");
    flag("ngram-cutoff", ta.theta, "Minimum training count of a retained n-gram (cond)");
    flag("ngram-max", ta.n_max, "Maximum n-gram order (cond)");
    flag("lr", ta.lr, "Initial learning rate");
    flag("lr-decay", ta.lr_decay, "Learning-rate divisor once validation entropy rises");
    flag("clip", ta.clip, "Per-entry gradient clip");
    flag("bptt", ta.bptt, "Truncated BPTT window");
    flag("max-epochs", ta.max_epochs, "Epoch limit");
    flag("max-decays", ta.max_decays, "Stop after this many learning-rate decays");
    flag("seed", ta.seed, "Experiment seed");
    ta.flags.emplace_back("bits", cmd_train->add_flag("--bits", ta.bits, "Model the 8-bit binary expansion"));
    for (auto& [key, opt] : ta.flags)
        opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    EvalArgs ea;
    auto* cmd_eval = app.add_subcommand("eval", "Entropy of a checkpoint on a text (TSV)");
    cmd_eval->add_option("--ckpt", ea.ckpt, "Checkpoint")->required();
    cmd_eval->add_option("--text", ea.text, "Text to evaluate")->required();
    cmd_eval->add_flag("--bits", ea.bits, "Require a bit-level checkpoint and report bits per bit");
    cmd_eval->add_option("--shards", ea.shards, "Evaluate this many shards in parallel, each from a zero state")
        ->check(CLI::PositiveNumber);

    SampleArgs sa;
    auto* cmd_sample = app.add_subcommand("sample", "Generate text from a checkpoint");
    cmd_sample->add_option("--ckpt", sa.ckpt, "Checkpoint")->required();
    cmd_sample->add_option("--length", sa.length, "Characters to generate")->capture_default_str();
    cmd_sample->add_option("--seed", sa.seed, "Sampling seed")->capture_default_str();
    cmd_sample->add_option("--temperature", sa.temperature, "Softmax temperature")->capture_default_str();

    SplitArgs sp;
    auto* cmd_split = app.add_subcommand("split", "Shuffle corpus lines into train/valid/test files");
    cmd_split->add_option("--corpus", sp.corpus, "One sentence per line")->required();
    cmd_split->add_option("--seed", sp.seed, "Split seed")->capture_default_str();
    cmd_split->add_option("--out-prefix", sp.out_prefix, "Writes PREFIX.train, PREFIX.valid, PREFIX.test")
        ->required();
    cmd_split->add_option("--sizes", sp.sizes, "train,valid,test line counts (default 60000,10000,10000)")
        ->delimiter(',')
        ->expected(3);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? ok : usage;
    }

    try {
        if (*cmd_vocab)
            return run_build_vocab(bv);
        if (*cmd_train)
            return run_train(ta);
        if (*cmd_eval)
            return run_eval(ea);
        if (*cmd_sample)
            return run_sample(sa);
        if (*cmd_split)
            return run_split(sp);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return usage;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return usage;
    } catch (const ParameterError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return usage;
    } catch (const DivergenceError& e) {
        std::cerr << "error: training diverged at step " << e.step() << ": " << e.what() << '\n';
        return diverged;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return io;
    }
    return usage;
}
