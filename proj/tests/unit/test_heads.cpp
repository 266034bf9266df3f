#include <cmath>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "bugforge/annotator.hpp"
#include "bugforge/detector.hpp"
#include "bugforge/errors.hpp"
#include "bugforge/mlm_mutator.hpp"
#include "bugforge/tokenizer.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace bugforge;

namespace {

EncoderConfig grad_config(int vocab) {
  EncoderConfig cfg;
  cfg.vocab_size = vocab;
  cfg.hidden = 8;
  cfg.layers = 1;
  cfg.heads = 1;
  cfg.max_positions = 96;  // room for fixture functions under sparse merges
  cfg.dropout = 0.0;  // finite differences need a deterministic loss
  return cfg;
}

// Central finite differences against the analytic gradient, parameter by
// parameter. Gradients this small drown in truncation noise, so near-zero
// pairs only need absolute agreement.
template <typename LossFn>
void check_gradients(const std::vector<TensorRef>& params, const std::vector<TensorRef>& grads,
                     LossFn&& loss) {
  const double h = 1e-5;
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (long long i = 0; i < params[t].size; ++i) {
      double& value = params[t].data[i];
      const double saved = value;
      value = saved + h;
      const double up = loss();
      value = saved - h;
      const double down = loss();
      value = saved;
      const double numeric = (up - down) / (2 * h);
      const double analytic = grads[t].data[i];
      const double scale = std::max(std::abs(analytic), std::abs(numeric));
      CAPTURE(params[t].name);
      CAPTURE(i);
      CAPTURE(analytic);
      CAPTURE(numeric);
      if (scale < 1e-7) {
        CHECK(std::abs(analytic - numeric) < 1e-7);
      } else {
        CHECK(std::abs(analytic - numeric) / scale < 1e-4);
      }
    }
  }
}

}  // namespace

TEST_SUITE_BEGIN("model");

TEST_CASE("pointer probabilities live on the mask and normalize") {
  SUBCASE("equal scores spread evenly") {
    std::vector<double> scores(8, 1.3);
    std::vector<int> mask = {0, 2, 5, 7};
    std::vector<double> probs = pointer_probabilities(scores, mask);
    REQUIRE(probs.size() == scores.size());
    for (int m : mask) CHECK(probs[m] == doctest::Approx(0.25).epsilon(1e-9));
    for (std::size_t i = 0; i < probs.size(); ++i)
      if (std::find(mask.begin(), mask.end(), static_cast<int>(i)) == mask.end())
        CHECK(probs[i] == 0.0);
  }
  SUBCASE("a log-3 gap gives one-to-three odds") {
    std::vector<double> scores = {0, 0, 0, 0, 0, std::log(3.0)};
    std::vector<double> probs = pointer_probabilities(scores, {0, 5});
    CHECK(probs[0] == doctest::Approx(0.25).epsilon(1e-9));
    CHECK(probs[5] == doctest::Approx(0.75).epsilon(1e-9));
  }
  SUBCASE("mass always sums to one") {
    Rng rng(107);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> scores(12);
      for (double& s : scores) s = rng.uniform_real() * 10 - 5;
      std::vector<double> probs = pointer_probabilities(scores, {0, 3, 4, 9, 11});
      const double sum = std::accumulate(probs.begin(), probs.end(), 0.0);
      CHECK(std::abs(sum - 1.0) < 1e-6);
    }
  }
  SUBCASE("an empty mask is rejected") {
    CHECK_THROWS_AS(pointer_probabilities({1.0, 2.0}, {}), ConfigError);
  }
}

TEST_CASE("shifting every score leaves the distribution unchanged") {
  Rng rng(109);
  std::vector<double> scores(10);
  for (double& s : scores) s = rng.uniform_real() * 6 - 3;
  const std::vector<int> mask = {0, 1, 4, 8};
  std::vector<double> base = pointer_probabilities(scores, mask);
  for (double shift : {-100.0, -1.0, 0.5, 40.0}) {
    std::vector<double> shifted = scores;
    for (double& s : shifted) s += shift;
    std::vector<double> probs = pointer_probabilities(shifted, mask);
    for (std::size_t i = 0; i < probs.size(); ++i)
      CHECK(std::abs(probs[i] - base[i]) < 1e-9);
  }
}

TEST_CASE("prediction takes the argmax and breaks ties low") {
  std::vector<double> probs = {0.25, 0.0, 0.5, 0.0, 0.25};
  CHECK(predict(probs, {0, 2, 4}) == 2);
  // Exact tie between 0 and 4: the lower index wins.
  std::vector<double> tied = {0.4, 0.0, 0.2, 0.0, 0.4};
  CHECK(predict(tied, {0, 2, 4}) == 0);
}

TEST_CASE("a fresh detector scores every token identically and points at zero") {
  Rng init(31);
  DetectorModel model = make_detector(grad_config(10), init);
  std::vector<DetectorItem> items = {{{{2, 5, 6, 7, 3}, {0, 1, 2, 3, 4}},
                                      {0, 1, 2, 3, 4},
                                      {0, 2, 3},
                                      0}};
  DetectorForward fwd = detector_forward(model, items, false, nullptr);
  REQUIRE(fwd.scores.size() == 1);
  REQUIRE(fwd.scores[0].size() == 5);
  for (double s : fwd.scores[0]) CHECK(s == 0.0);  // zero head
  CHECK(predict(fwd.probs[0], items[0].mask) == 0);
  // Uniform over |M| = 3 puts the loss at ln 3.
  CHECK(fwd.loss == doctest::Approx(std::log(3.0)).epsilon(1e-9));
}

TEST_CASE("detector gradients match finite differences") {
  Rng init(37);
  DetectorModel model = make_detector(grad_config(12), init);
  // Nudge the head off zero so its gradients are informative.
  Rng head(41);
  for (int i = 0; i < model.score_w.size(); ++i)
    model.score_w(i) = (head.uniform_real() - 0.5) * 0.2;
  model.score_b = 0.05;

  std::vector<DetectorItem> items = {
      {{{2, 5, 6, 7, 3}, {0, 1, 2, 3, 4}}, {0, 1, 2, 3, 4}, {0, 2, 3}, 3},
      {{{2, 8, 9, 10, 11, 3}, {2, 3, 4, 5, 6, 7}}, {0, 1, 2, 3, 4, 5}, {0, 1, 4}, 0},
  };

  DetectorForward fwd = detector_forward(model, items, false, nullptr);
  DetectorModel grads = detector_zero_like(model);
  detector_backward(model, items, fwd, 1.0, grads);

  check_gradients(tensor_refs(model), tensor_refs(grads), [&] {
    return detector_forward(model, items, false, nullptr).loss;
  });
}

TEST_CASE("masking collapses a token span to a single slot") {
  Corpus corpus = fixtures::comparison_corpus(10, 111);
  // Few merges: long identifiers must fragment into several pieces.
  SubtokenModel subtok = fixtures::fixture_subtokens(corpus, 12);
  TokenSequence seq = tokenize(corpus.records[0].source);
  SubtokenEncoding enc = encode(seq, subtok);

  // Pick a token that fragments into several pieces; its span must shrink
  // to exactly one MASK id while every other token keeps its text.
  int victim = -1;
  for (std::size_t t = 1; t + 1 < seq.size(); ++t) {
    if (enc.spans[t].second - enc.spans[t].first >= 2) {
      victim = static_cast<int>(t);
      break;
    }
  }
  REQUIRE(victim > 0);
  const int span_len = enc.spans[victim].second - enc.spans[victim].first;

  SubtokenEncoding masked = mask_targets(enc, victim, subtok);
  CHECK(masked.ids.size() == enc.ids.size() - span_len + 1);
  CHECK(masked.spans[victim].second - masked.spans[victim].first == 1);
  CHECK(masked.ids[masked.spans[victim].first] == subtok.mask_id);
  int mask_count = 0;
  for (int id : masked.ids) mask_count += id == subtok.mask_id ? 1 : 0;
  CHECK(mask_count == 1);
  std::vector<std::string> texts = decode(masked, subtok);
  CHECK(texts[victim] == kMaskText);
  CHECK(texts[victim - 1] == seq.tokens[victim - 1].text);
  CHECK(texts[victim + 1] == seq.tokens[victim + 1].text);
}

TEST_CASE("a fresh mutator spreads replacement mass uniformly") {
  Corpus corpus = fixtures::comparison_corpus(10, 113);
  SubtokenModel subtok = fixtures::fixture_subtokens(corpus);
  Rng init(43);
  EncoderConfig cfg = grad_config(subtok.vocab_size());
  MutatorModel model = make_mutator(cfg, init);

  TokenSequence seq = tokenize(corpus.records[2].source);
  std::vector<TargetAnnotation> targets = annotate(seq, BugType::bor_strong);
  REQUIRE(!targets.empty());
  const TargetAnnotation& target = targets[0];
  SubtokenEncoding enc = encode(seq, subtok);
  SubtokenEncoding masked = mask_targets(enc, target.index, subtok);

  MlmItem item;
  item.input.ids = masked.ids;
  item.input.positions.resize(masked.ids.size());
  std::iota(item.input.positions.begin(), item.input.positions.end(), 0);
  item.mask_pos = masked.spans[target.index].first;
  item.candidates = target.candidates;
  item.original = seq.tokens[target.index].text;

  MlmForward fwd = mlm_forward(model, {item}, subtok, false, nullptr);
  REQUIRE(fwd.scores.size() == 1);
  for (double s : fwd.scores[0]) CHECK(s == 0.0);  // zero head
  const double k = static_cast<double>(item.candidates.size());
  for (double p : fwd.restricted[0]) CHECK(p == doctest::Approx(1.0 / k).epsilon(1e-9));
  // Uniform over candidates plus the original.
  CHECK(fwd.loss == doctest::Approx(std::log(k + 1)).epsilon(1e-7));
  // The ROR class has five alternatives, pinning the constant.
  REQUIRE(item.candidates.size() == 5);
  CHECK(fwd.loss == doctest::Approx(1.791759).epsilon(1e-6));
}

TEST_CASE("replacement distributions renormalize after the original drops out") {
  SUBCASE("published renormalization case") {
    // Raw model mass {==:.16, !=:.05, <:.45, >:.06, >=:.11, <=:.07, +:.01}
    // with "<=" as the original: the rest renormalizes over 0.84, e.g.
    // P(<) = 0.45 / 0.84.
    const std::vector<std::string> cands = {"==", "!=", "<", ">", ">=", "<=", "+"};
    const std::vector<double> mass = {0.16, 0.05, 0.45, 0.06, 0.11, 0.07, 0.01};
    std::vector<double> scores(mass.size());
    for (std::size_t i = 0; i < mass.size(); ++i) scores[i] = std::log(mass[i]);
    std::vector<double> probs = replacement_distribution(scores, cands, "<=");
    REQUIRE(probs.size() == 6);  // the original is gone
    CHECK(probs[0] == doctest::Approx(0.16 / 0.84).epsilon(1e-9));  // ==
    CHECK(probs[2] == doctest::Approx(0.45 / 0.84).epsilon(1e-9));  // <
    CHECK(std::accumulate(probs.begin(), probs.end(), 0.0) ==
          doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("uniform scores stay uniform") {
    std::vector<double> probs = replacement_distribution(std::vector<double>(5, 0.7));
    for (double p : probs) CHECK(p == doctest::Approx(0.2).epsilon(1e-9));
  }
  SUBCASE("a single candidate takes all the mass") {
    std::vector<double> probs = replacement_distribution({-3.2});
    REQUIRE(probs.size() == 1);
    CHECK(probs[0] == doctest::Approx(1.0));
  }
  SUBCASE("losing every candidate is an error") {
    CHECK_THROWS_AS(replacement_distribution({0.0}, {"<"}, "<"), ConfigError);
  }
}

TEST_CASE("replacement sampling follows the distribution and spares the original") {
  Rng rng(127);
  const std::vector<double> probs = {0.25, 0.75};
  int second = 0;
  const int draws = 1000000;
  for (int i = 0; i < draws; ++i) second += sample_replacement(probs, rng) == 1 ? 1 : 0;
  CHECK(std::abs(second / double(draws) - 0.75) < 0.002);

  for (int i = 0; i < 100; ++i) CHECK(sample_replacement({1.0}, rng) == 0);
}

TEST_CASE("mutator gradients match finite differences") {
  Corpus corpus = fixtures::comparison_corpus(6, 131);
  SubtokenModel subtok = fixtures::fixture_subtokens(corpus, 40);
  Rng init(47);
  MutatorModel model = make_mutator(grad_config(subtok.vocab_size()), init);
  // Same deal as the detector: zero heads produce zero gradients for most
  // tensors, so perturb the head first.
  Rng head(53);
  for (int r = 0; r < model.head_w.rows(); ++r)
    for (int c = 0; c < model.head_w.cols(); ++c)
      model.head_w(r, c) = (head.uniform_real() - 0.5) * 0.2;

  std::vector<MlmItem> items;
  for (int rec = 0; rec < 2; ++rec) {
    TokenSequence seq = tokenize(corpus.records[rec].source);
    std::vector<TargetAnnotation> targets = annotate(seq, BugType::bor_weak);
    REQUIRE(!targets.empty());
    SubtokenEncoding enc = encode(seq, subtok);
    SubtokenEncoding masked = mask_targets(enc, targets[0].index, subtok);
    MlmItem item;
    item.input.ids = masked.ids;
    item.input.positions.resize(masked.ids.size());
    std::iota(item.input.positions.begin(), item.input.positions.end(), 0);
    item.mask_pos = masked.spans[targets[0].index].first;
    item.candidates = targets[0].candidates;
    item.original = seq.tokens[targets[0].index].text;
    items.push_back(std::move(item));
  }

  MlmForward fwd = mlm_forward(model, items, subtok, false, nullptr);
  MutatorModel grads = mutator_zero_like(model);
  mlm_backward(model, items, subtok, fwd, 1.0, grads);

  check_gradients(tensor_refs(model), tensor_refs(grads), [&] {
    return mlm_forward(model, items, subtok, false, nullptr).loss;
  });
}

TEST_SUITE_END();
