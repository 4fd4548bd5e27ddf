// Trains the three architectures on a small built-in text and prints their
// validation and test entropy and a sample from each.

#include <iostream>
#include <iterator>

#include <ccrnn/ccrnn.hpp>

using namespace ccrnn;

namespace {

const char* const lines[] = {
    "the cat sat on the mat",      "the dog sat on the log",     "a cat and a dog ran to the mat",
    "the red cat sat on a big log", "a big dog ran on the mat",  "the cat ran to the red dog",
    "on the log sat a big cat",    "the dog and the cat sat",    "a red dog sat on the big mat",
};

} // namespace

int main()
{
    std::string train_text, valid_text, test_text;
    for (int rep = 0; rep < 30; ++rep)
        for (const char* l : lines)
            (train_text += l) += '\n';
    for (const char* l : lines)
        (valid_text += l) += '\n';
    for (auto it = std::rbegin(lines); it != std::rend(lines); ++it)
        (test_text += *it) += '\n';

    const auto cv = build_char_vocab(std::string_view(train_text));
    const auto wv = build_word_vocab(train_text, 12);
    const auto train = encode_stream(train_text, cv, wv);
    const auto valid = encode_stream(valid_text, cv, wv);
    const auto test = encode_stream(test_text, cv, wv);
    std::cout << "alphabet " << cv.size() << ", words " << wv.size() << ", training chars " << train.size()
              << "\n\n";

    std::vector<TableRow> rows;
    for (auto kind : {ModelKind::plain, ModelKind::mixed, ModelKind::conditional}) {
        TrainConfig c;
        c.model_kind = kind;
        c.hidden = 24;
        c.word_hidden = 8;
        c.word_topk = 12;
        c.word_out = 12;
        c.theta = 20;
        c.n_max = 3;
        c.max_epochs = 8;
        const auto idx = NGramIndex::build(train.chars, c.theta, c.n_max);
        double seconds = 0;
        const auto r = fit(c, init_model(c, cv.size(), wv.size(), &idx), train, valid,
                           [&](const EpochLog& e) { seconds += e.seconds; });
        rows.push_back({to_string(kind), c.hidden, kind, evaluate(r.best, valid), evaluate(r.best, test),
                        seconds / double(r.log.size())});

        Rng rng(derive_seed(c.seed, SeedStream::sample));
        std::cout << to_string(kind) << " sample:\n" << sample_text(r.best, cv, wv, rng, 120, 0.7) << "\n\n";
    }
    std::cout << report_table(rows);
}
