#pragma once

#include "char_rnn.hpp"
#include "checkpoint.hpp"
#include "cond_rnn.hpp"
#include "config.hpp"
#include "corpus.hpp"
#include "error.hpp"
#include "evaluator.hpp"
#include "mixed_rnn.hpp"
#include "model.hpp"
#include "ngram_index.hpp"
#include "report.hpp"
#include "rng.hpp"
#include "sampling.hpp"
#include "tensor.hpp"
#include "trainer.hpp"
#include "utf8.hpp"
