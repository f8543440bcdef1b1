#include "grounded/decoder.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "grounded/activations.h"
#include "grounded/params.h"
#include "json_util.h"

namespace grounded {

using internal::Json;

namespace {

DecoderParams ZeroParams(const DecoderDims& d) {
  DecoderParams p;
  p.embedding = Matrix(d.vocab, d.embedding);
  p.lstm_w = Matrix(4 * d.hidden, d.input() + d.hidden);
  p.lstm_b = Matrix(4 * d.hidden, 1);
  p.w_id = Matrix(d.attention, d.d_head);
  p.w_head = Matrix(d.attention, d.d_head);
  p.w_body = Matrix(d.attention, d.d_body);
  p.w_stat = Matrix(d.attention, d.d_stat);
  p.b_v = Matrix(d.attention, 1);
  p.w_h = Matrix(d.attention, d.hidden);
  p.b_h = Matrix(d.attention, 1);
  p.w_alpha = Matrix(1, d.attention);
  p.b_alpha = Matrix(1, 1);
  p.w_pred = Matrix(d.vocab, d.hidden);
  p.b_pred = Matrix(d.vocab, 1);
  return p;
}

}  // namespace

DecoderParams InitDecoderParams(const DecoderDims& d, Rng& rng) {
  DecoderParams p = ZeroParams(d);
  for (Matrix* m : {&p.embedding, &p.lstm_w, &p.w_id, &p.w_head, &p.w_body,
                    &p.w_stat, &p.w_h, &p.w_alpha, &p.w_pred}) {
    XavierInit(*m, rng);
  }
  InitLstmBias(p.lstm_b);
  return p;
}

void CheckDecoderShapes(DecoderParams& params, const DecoderDims& dims) {
  DecoderParams expected = ZeroParams(dims);
  std::vector<std::pair<std::string_view, const Matrix*>> want;
  expected.ForEach([&](std::string_view name, Matrix& m) {
    want.emplace_back(name, &m);
  });
  std::size_t i = 0;
  params.ForEach([&](std::string_view name, Matrix& m) {
    if (!m.SameShape(*want[i].second)) {
      throw std::invalid_argument("decoder tensor " + std::string(name) +
                                  " has the wrong shape");
    }
    ++i;
  });
}

std::vector<const Track*> CurrentTracks(const Clip& clip, int c_max) {
  std::vector<const Track*> out;
  for (const Track& t : clip.tracks) {
    if (static_cast<int>(out.size()) == c_max) break;
    out.push_back(&t);
  }
  return out;
}

namespace {

// Cells are indexed k = p * C + c with p = 0 the null track.
struct Grid {
  int C = 0;
  int P = 0;  // real previous tracks
  std::span<const Track* const> current;
  std::span<const Track* const> previous;
  std::vector<Vec> vid;  // per cell
  std::vector<Vec> F;    // htan(f_visual) per cell
  int cells() const { return (P + 1) * C; }
};

Grid BuildGrid(const DecoderParams& params, const DecoderDims& d,
               std::span<const Track* const> current,
               std::span<const Track* const> previous) {
  if (static_cast<int>(current.size()) > d.c_max ||
      static_cast<int>(previous.size()) > d.p_max) {
    throw std::invalid_argument("track counts exceed the attention grid");
  }
  Grid g;
  g.C = static_cast<int>(current.size());
  g.P = static_cast<int>(previous.size());
  g.current = current;
  g.previous = previous;
  std::vector<Vec> pre(g.C);
  for (int c = 0; c < g.C; ++c) {
    const Track& t = *current[c];
    if (static_cast<int>(t.v_head.size()) != d.d_head ||
        static_cast<int>(t.v_body.size()) != d.d_body ||
        static_cast<int>(t.v_stat.size()) != d.d_stat) {
      throw std::invalid_argument("track feature widths disagree with model");
    }
    pre[c] = MatVec(params.w_head, t.v_head);
    MatVecAcc(params.w_body, t.v_body, pre[c]);
    MatVecAcc(params.w_stat, t.v_stat, pre[c]);
    Axpy(1.0, params.b_v.values(), pre[c]);
  }
  for (const Track* t : previous) {
    if (static_cast<int>(t->v_head.size()) != d.d_head) {
      throw std::invalid_argument("track feature widths disagree with model");
    }
  }
  g.vid.resize(g.cells());
  g.F.resize(g.cells());
  for (int p = 0; p <= g.P; ++p) {
    for (int c = 0; c < g.C; ++c) {
      const int k = p * g.C + c;
      Vec& vid = g.vid[k];
      if (p == 0) {
        vid.assign(d.d_head, -1.0);
      } else {
        vid = previous[p - 1]->v_head;
        const Vec& h = current[c]->v_head;
        for (int j = 0; j < d.d_head; ++j) vid[j] *= h[j];
      }
      Vec z = pre[c];
      MatVecAcc(params.w_id, vid, z);
      g.F[k] = Htan(z);
    }
  }
  return g;
}

struct StepState {
  Vec g;      // htan(W_h h_prev + b_h)
  Vec alpha;  // per cell
  Vec vg;
  LstmCache lstm;
  Vec probs;
};

void Attend(const DecoderParams& params, const DecoderDims& d, const Grid& grid,
            std::span<const double> h_prev, StepState& s, Vec* logits_out) {
  s.vg.assign(d.grounded(), 0.0);
  s.alpha.clear();
  if (grid.C == 0) return;
  Vec zh(params.b_h.values().begin(), params.b_h.values().end());
  MatVecAcc(params.w_h, h_prev, zh);
  s.g = Htan(zh);
  Vec wg(d.attention);
  for (int a = 0; a < d.attention; ++a) wg[a] = params.w_alpha(0, a) * s.g[a];
  const int n = grid.cells();
  Vec logits(n);
  for (int k = 0; k < n; ++k) logits[k] = Dot(wg, grid.F[k]) + params.b_alpha(0, 0);
  s.alpha = Softmax(logits);
  if (logits_out) *logits_out = std::move(logits);

  // Mass per current track drives the head, body and stat segments.
  Vec per_c(grid.C, 0.0);
  std::span<double> vg(s.vg);
  auto head = vg.subspan(0, d.d_head);
  auto body = vg.subspan(d.d_head, d.d_body);
  auto stat = vg.subspan(d.d_head + d.d_body, d.d_stat);
  auto id = vg.subspan(d.d_head + d.d_body + d.d_stat, d.d_head);
  for (int k = 0; k < n; ++k) {
    per_c[k % grid.C] += s.alpha[k];
    Axpy(s.alpha[k], grid.vid[k], id);
  }
  for (int c = 0; c < grid.C; ++c) {
    const Track& t = *grid.current[c];
    Axpy(per_c[c], t.v_head, head);
    Axpy(per_c[c], t.v_body, body);
    Axpy(per_c[c], t.v_stat, stat);
  }
}

// Runs the recurrent step and word distribution after Attend.
void Advance(const DecoderParams& params, const DecoderDims& d,
             const Clip& clip, int prev_word, std::span<const double> h_prev,
             std::span<const double> c_prev, StepState& s) {
  Vec x;
  x.reserve(d.input());
  x.insert(x.end(), s.vg.begin(), s.vg.end());
  if (static_cast<int>(clip.v_global.size()) != d.d_global) {
    throw std::invalid_argument("clip v_global width disagrees with model");
  }
  x.insert(x.end(), clip.v_global.begin(), clip.v_global.end());
  const auto emb = params.embedding.row(prev_word);
  x.insert(x.end(), emb.begin(), emb.end());
  LstmForward(params.lstm_w, params.lstm_b, x, h_prev, c_prev, s.lstm);
  Vec logits(params.b_pred.values().begin(), params.b_pred.values().end());
  MatVecAcc(params.w_pred, s.lstm.h, logits);
  s.probs = Softmax(logits);
}

int WordAt(const DecoderExample& ex, int step, int eos) {
  return step < static_cast<int>(ex.tokens.size()) ? ex.tokens[step] : eos;
}

int InputAt(const DecoderExample& ex, int step, int bos) {
  return step == 0 ? bos : ex.tokens[step - 1];
}

// Teacher-forced forward pass over all steps.
std::vector<StepState> Unroll(const DecoderParams& params, const DecoderDims& d,
                              const Grid& grid, const DecoderExample& ex) {
  const int steps = static_cast<int>(ex.tokens.size()) + 1;
  std::vector<StepState> states(steps);
  const Vec zeros(d.hidden, 0.0);
  for (int s = 0; s < steps; ++s) {
    std::span<const double> h = s == 0 ? zeros : states[s - 1].lstm.h;
    std::span<const double> c = s == 0 ? zeros : states[s - 1].lstm.c;
    Attend(params, d, grid, h, states[s], nullptr);
    Advance(params, d, *ex.clip, InputAt(ex, s, 0), h, c, states[s]);
  }
  return states;
}

std::vector<int> TargetCells(const DecoderExample& ex, const Grid& grid,
                             int steps) {
  std::vector<int> cell(steps, -1);
  for (const StepTarget& t : ex.targets) {
    if (t.step >= 0 && t.step < steps && t.c >= 0 && t.c < grid.C &&
        t.p >= 0 && t.p <= grid.P) {
      cell[t.step] = t.p * grid.C + t.c;
    }
  }
  return cell;
}

}  // namespace

AttentionMap JointAttention(const DecoderParams& params, const DecoderDims& d,
                            std::span<const double> h_prev,
                            std::span<const Track* const> current,
                            std::span<const Track* const> previous) {
  const Grid grid = BuildGrid(params, d, current, previous);
  StepState s;
  Vec logits;
  Attend(params, d, grid, h_prev, s, &logits);
  AttentionMap map;
  map.alpha = Matrix(d.p_max + 1, d.c_max, 0.0);
  map.logits = Matrix(d.p_max + 1, d.c_max,
                      -std::numeric_limits<double>::infinity());
  map.v_grounded = s.vg;
  map.defined = grid.C > 0;
  for (int k = 0; k < grid.cells(); ++k) {
    map.alpha(k / grid.C, k % grid.C) = s.alpha[k];
    map.logits(k / grid.C, k % grid.C) = logits[k];
  }
  return map;
}

std::vector<DecoderExample> MakeDecoderExamples(
    const Corpus& corpus, const Vocabulary& vocab,
    std::span<const AlphaTarget> alpha_gt, const DecoderDims& dims,
    const std::string& split) {
  std::map<std::string, std::vector<const AlphaTarget*>> by_clip;
  for (const AlphaTarget& t : alpha_gt) by_clip[t.pair_id].push_back(&t);
  std::vector<DecoderExample> out;
  for (const Clip& clip : corpus.clips) {
    if (!split.empty() && clip.split != split) continue;
    DecoderExample ex;
    ex.clip = &clip;
    ex.current = CurrentTracks(clip, dims.c_max);
    const auto it = by_clip.find(clip.id);
    if (const Clip* prev = corpus.Previous(clip)) {
      const std::vector<int> ids =
          it != by_clip.end() ? it->second.front()->prev_tracks
                              : LargestTracks(*prev, dims.p_max);
      for (int id : ids) {
        const Track* t = prev->FindTrack(id);
        if (t != nullptr && static_cast<int>(ex.previous.size()) < dims.p_max) {
          ex.previous.push_back(t);
        }
      }
    }
    for (const std::string& w : clip.sentence) ex.tokens.push_back(vocab.Index(w));
    if (it != by_clip.end()) {
      for (const AlphaTarget* t : it->second) {
        if (!t->c) continue;
        const int step = t->tau;
        auto find = [](const std::vector<const Track*>& v, int id) {
          for (std::size_t i = 0; i < v.size(); ++i) {
            if (v[i]->id == id) return static_cast<int>(i);
          }
          return -1;
        };
        const int c = find(ex.current, *t->c);
        const int p = t->p == 0 ? 0 : find(ex.previous, t->p) + 1;
        if (step < 0 || step >= static_cast<int>(ex.tokens.size()) ||
            !vocab.IsPerson(ex.tokens[step]) || c < 0 || p < 0) {
          ++ex.skipped_targets;
          continue;
        }
        ex.targets.push_back({step, p, c});
      }
    }
    out.push_back(std::move(ex));
  }
  return out;
}

SentenceLoss ComputeSentenceLoss(const DecoderParams& params,
                                 const DecoderDims& d,
                                 const DecoderExample& ex,
                                 double attention_weight,
                                 DecoderParams* grads) {
  const Grid grid = BuildGrid(params, d, ex.current, ex.previous);
  const std::vector<StepState> states = Unroll(params, d, grid, ex);
  const int steps = static_cast<int>(states.size());
  const std::vector<int> target = TargetCells(ex, grid, steps);
  const int eos = 1;

  SentenceLoss loss;
  for (int s = 0; s < steps; ++s) {
    loss.word -= std::log(states[s].probs[WordAt(ex, s, eos)]);
    if (target[s] >= 0) {
      loss.attention -= std::log(states[s].alpha[target[s]]);
      ++loss.supervised;
    }
  }
  loss.attention *= attention_weight;
  loss.total = loss.word + loss.attention;
  if (grads == nullptr) return loss;

  DecoderParams& g = *grads;
  const int G = d.grounded();
  const int n = grid.cells();
  std::vector<Vec> dF(n, Vec(d.attention, 0.0));
  Vec dh_carry(d.hidden, 0.0), dc_carry(d.hidden, 0.0);
  Vec dx(d.input()), dh_prev(d.hidden), dc_prev(d.hidden);
  const Vec zeros(d.hidden, 0.0);
  for (int s = steps - 1; s >= 0; --s) {
    const StepState& st = states[s];
    Vec dlog = st.probs;
    dlog[WordAt(ex, s, eos)] -= 1.0;
    AddOuter(g.w_pred, dlog, st.lstm.h);
    Axpy(1.0, dlog, g.b_pred.values());
    Vec dh = dh_carry;
    MatTVecAcc(params.w_pred, dlog, dh);
    LstmBackward(params.lstm_w, st.lstm, dh, dc_carry, g.lstm_w, g.lstm_b, dx,
                 dh_prev, dc_prev);
    Axpy(1.0, std::span<const double>(dx).subspan(G + d.d_global),
         g.embedding.row(InputAt(ex, s, 0)));

    if (grid.C > 0) {
      std::span<const double> dvg(dx.data(), G);
      auto dhead = dvg.subspan(0, d.d_head);
      auto dbody = dvg.subspan(d.d_head, d.d_body);
      auto dstat = dvg.subspan(d.d_head + d.d_body, d.d_stat);
      auto did = dvg.subspan(d.d_head + d.d_body + d.d_stat, d.d_head);
      Vec q(grid.C);
      for (int c = 0; c < grid.C; ++c) {
        const Track& t = *grid.current[c];
        q[c] = Dot(dhead, t.v_head) + Dot(dbody, t.v_body) + Dot(dstat, t.v_stat);
      }
      Vec dalpha(n);
      for (int k = 0; k < n; ++k) dalpha[k] = q[k % grid.C] + Dot(did, grid.vid[k]);
      const double mean = Dot(st.alpha, dalpha);
      Vec dlogit(n);
      for (int k = 0; k < n; ++k) dlogit[k] = st.alpha[k] * (dalpha[k] - mean);
      if (target[s] >= 0) {
        for (int k = 0; k < n; ++k) {
          dlogit[k] += attention_weight * (st.alpha[k] - (k == target[s]));
        }
      }
      Vec S(d.attention, 0.0);
      double dbias = 0.0;
      Vec wg(d.attention);
      for (int a = 0; a < d.attention; ++a) wg[a] = params.w_alpha(0, a) * st.g[a];
      for (int k = 0; k < n; ++k) {
        dbias += dlogit[k];
        Axpy(dlogit[k], grid.F[k], S);
        Axpy(dlogit[k], wg, dF[k]);
      }
      g.b_alpha(0, 0) += dbias;
      Vec dzh(d.attention);
      for (int a = 0; a < d.attention; ++a) {
        g.w_alpha(0, a) += st.g[a] * S[a];
        dzh[a] = params.w_alpha(0, a) * S[a] * (1.0 - st.g[a] * st.g[a]);
      }
      std::span<const double> h_in = s == 0 ? zeros : states[s - 1].lstm.h;
      AddOuter(g.w_h, dzh, h_in);
      Axpy(1.0, dzh, g.b_h.values());
      MatTVecAcc(params.w_h, dzh, dh_prev);
    }
    dh_carry = dh_prev;
    dc_carry = dc_prev;
  }

  std::vector<Vec> dpre(grid.C, Vec(d.attention, 0.0));
  for (int k = 0; k < n; ++k) {
    Vec dz(d.attention);
    for (int a = 0; a < d.attention; ++a) {
      dz[a] = dF[k][a] * (1.0 - grid.F[k][a] * grid.F[k][a]);
    }
    AddOuter(g.w_id, dz, grid.vid[k]);
    Axpy(1.0, dz, dpre[k % grid.C]);
  }
  for (int c = 0; c < grid.C; ++c) {
    const Track& t = *grid.current[c];
    AddOuter(g.w_head, dpre[c], t.v_head);
    AddOuter(g.w_body, dpre[c], t.v_body);
    AddOuter(g.w_stat, dpre[c], t.v_stat);
    Axpy(1.0, dpre[c], g.b_v.values());
  }
  return loss;
}

namespace {

Vocabulary TrainVocabulary(const Corpus& corpus, const std::string& split) {
  std::vector<std::string> words;
  for (const Clip& clip : corpus.clips) {
    if (clip.split != split) continue;
    words.insert(words.end(), clip.sentence.begin(), clip.sentence.end());
  }
  return Vocabulary(words);
}

DecoderDims InferDims(const Corpus& corpus, const DecoderTrainOptions& o,
                      const Vocabulary& vocab) {
  DecoderDims d = o.dims;
  d.vocab = vocab.size();
  bool global_seen = false, tracks_seen = false;
  for (const Clip& clip : corpus.clips) {
    if (clip.split != o.train_split) continue;
    if (!global_seen) {
      d.d_global = static_cast<int>(clip.v_global.size());
      global_seen = true;
    }
    if (!tracks_seen && !clip.tracks.empty()) {
      const Track& t = clip.tracks.front();
      d.d_head = static_cast<int>(t.v_head.size());
      d.d_body = static_cast<int>(t.v_body.size());
      d.d_stat = static_cast<int>(t.v_stat.size());
      tracks_seen = true;
    }
  }
  if (!global_seen) throw std::invalid_argument("decoder: empty training split");
  return d;
}

bool GradsFinite(DecoderParams& g) { return AllFinite(g); }

}  // namespace

DecoderModel TrainDecoder(const Corpus& corpus,
                          std::span<const AlphaTarget> alpha_gt,
                          const DecoderTrainOptions& options, Rng& rng,
                          DecoderTrainReport* report) {
  DecoderModel model;
  model.vocab = TrainVocabulary(corpus, options.train_split);
  model.dims = InferDims(corpus, options, model.vocab);
  Rng init = rng.Substream("decoder/init");
  model.params = InitDecoderParams(model.dims, init);
  const auto examples = MakeDecoderExamples(corpus, model.vocab, alpha_gt,
                                            model.dims, options.train_split);

  DecoderTrainReport local;
  DecoderTrainReport& rep = report ? *report : local;
  rep.examples = static_cast<int>(examples.size());
  for (const DecoderExample& ex : examples) {
    rep.supervised_targets += static_cast<int>(ex.targets.size());
    rep.skipped_targets += ex.skipped_targets;
  }

  Optimizer opt(options.optimizer);
  DecoderParams grads = ZerosLike(model.params);
  const auto bound = Bind(model.params, grads);
  DecoderParams last_good = model.params;
  std::vector<int> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle = rng.Substream("decoder/shuffle");
  const int batch = std::max(1, options.batch_size);

  auto diverge = [&](const std::string& why) {
    model.params = last_good;
    std::string where;
    if (options.checkpoint_on_failure) {
      SaveDecoder(model, *options.checkpoint_on_failure);
      where = "; last good parameters saved to " +
              options.checkpoint_on_failure->string();
    }
    throw TrainingDiverged("decoder training diverged: " + why + where);
  };

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    shuffle.Shuffle(std::span(order));
    SentenceLoss sum;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      grads.ForEach([](std::string_view, Matrix& m) { m.Fill(0.0); });
      SentenceLoss batch_loss;
      try {
        for (std::size_t k = start; k < end; ++k) {
          const SentenceLoss l =
              ComputeSentenceLoss(model.params, model.dims, examples[order[k]],
                                  options.attention_weight, &grads);
          batch_loss.total += l.total;
          batch_loss.word += l.word;
          batch_loss.attention += l.attention;
        }
      } catch (const std::invalid_argument& e) {
        diverge(e.what());
      }
      if (!std::isfinite(batch_loss.total) || !GradsFinite(grads)) {
        diverge("non-finite loss in epoch " + std::to_string(epoch));
      }
      sum.total += batch_loss.total;
      sum.word += batch_loss.word;
      sum.attention += batch_loss.attention;
      const double scale = 1.0 / static_cast<double>(end - start);
      grads.ForEach([&](std::string_view, Matrix& m) {
        for (double& v : m.values()) v *= scale;
      });
      last_good = model.params;
      opt.Step(bound);
      if (!AllFinite(model.params)) {
        diverge("non-finite parameters in epoch " + std::to_string(epoch));
      }
    }
    const double count = std::max<std::size_t>(1, examples.size());
    rep.epoch_loss.push_back(sum.total / count);
    rep.epoch_word_loss.push_back(sum.word / count);
    rep.epoch_attention_loss.push_back(sum.attention / count);
  }
  return model;
}

double AttentionAccuracy(const DecoderModel& model,
                         std::span<const DecoderExample> examples) {
  int total = 0, hits = 0;
  for (const DecoderExample& ex : examples) {
    if (ex.targets.empty()) continue;
    const Grid grid = BuildGrid(model.params, model.dims, ex.current, ex.previous);
    const auto states = Unroll(model.params, model.dims, grid, ex);
    const auto target = TargetCells(ex, grid, static_cast<int>(states.size()));
    for (std::size_t s = 0; s < states.size(); ++s) {
      if (target[s] < 0) continue;
      ++total;
      hits += static_cast<int>(ArgMax(states[s].alpha)) == target[s];
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(hits) / total;
}

DecodeResult DecodeClip(const DecoderModel& model, const Clip& clip,
                        std::span<const Track* const> previous,
                        const DecodeOptions& options) {
  const DecoderDims& d = model.dims;
  const auto current = CurrentTracks(clip, d.c_max);
  std::vector<const Track*> prev(previous.begin(), previous.end());
  if (static_cast<int>(prev.size()) > d.p_max) prev.resize(d.p_max);
  const Grid grid = BuildGrid(model.params, d, current, prev);
  DecodeResult out;
  Vec h(d.hidden, 0.0), c(d.hidden, 0.0);
  int word = model.vocab.bos();
  for (int step = 0; step < options.max_length; ++step) {
    StepState s;
    Attend(model.params, d, grid, h, s, nullptr);
    Advance(model.params, d, clip, word, h, c, s);
    word = static_cast<int>(ArgMax(s.probs));
    if (word == model.vocab.eos()) break;
    out.words.push_back(model.vocab.token(word));
    if (model.vocab.IsPerson(word) && grid.C > 0) {
      const int k = static_cast<int>(ArgMax(s.alpha));
      const int p = k / grid.C;
      GroundingPrediction pred;
      pred.tau = step;
      pred.word = model.vocab.token(word);
      pred.c = current[k % grid.C]->id;
      pred.p = p == 0 ? 0 : prev[p - 1]->id;
      out.predictions.push_back(pred);
      Matrix grid_alpha(d.p_max + 1, d.c_max, 0.0);
      for (int j = 0; j < grid.cells(); ++j) {
        grid_alpha(j / grid.C, j % grid.C) = s.alpha[j];
      }
      out.attention.push_back(std::move(grid_alpha));
    }
    h = s.lstm.h;
    c = s.lstm.c;
  }
  return out;
}

GroundingMap GroundingOf(std::span<const ClipPrediction> predictions) {
  GroundingMap out;
  for (const ClipPrediction& cp : predictions) {
    auto& ids = out[cp.id];
    for (const GroundingPrediction& p : cp.predictions) {
      if (std::find(ids.begin(), ids.end(), p.c) == ids.end()) ids.push_back(p.c);
    }
  }
  return out;
}

std::vector<ClipPrediction> DecodeCorpus(const DecoderModel& model,
                                         const Corpus& corpus,
                                         const std::string& split,
                                         const GroundingMap& prev_grounding,
                                         const DecodeOptions& options) {
  GroundingMap decoded;
  std::map<std::string, std::size_t> position;
  std::vector<ClipPrediction> out;
  for (const Clip& clip : corpus.clips) {
    std::vector<const Track*> previous;
    if (const Clip* prev = corpus.Previous(clip)) {
      const std::vector<int>* ids = nullptr;
      if (auto it = prev_grounding.find(prev->id); it != prev_grounding.end()) {
        ids = &it->second;
      } else if (auto jt = decoded.find(prev->id); jt != decoded.end()) {
        ids = &jt->second;
      }
      if (ids != nullptr) {
        for (int id : *ids) {
          const Track* t = prev->FindTrack(id);
          if (t != nullptr && static_cast<int>(previous.size()) < model.dims.p_max) {
            previous.push_back(t);
          }
        }
      }
    }
    const DecodeResult r = DecodeClip(model, clip, previous, options);
    ClipPrediction cp;
    cp.id = clip.id;
    cp.sentence = r.words;
    cp.predictions = r.predictions;
    auto& ids = decoded[clip.id];
    for (const GroundingPrediction& p : cp.predictions) {
      if (std::find(ids.begin(), ids.end(), p.c) == ids.end()) ids.push_back(p.c);
    }
    if (split.empty() || clip.split == split) out.push_back(std::move(cp));
  }
  return out;
}

namespace {

constexpr char kMagic[8] = {'G', 'R', 'C', 'K', 'P', 'T', '0', '1'};

void PutU64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t GetU64(const std::string& in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i]))
         << (8 * i);
  }
  return v;
}

Json DimsToJson(const DecoderDims& d) {
  return {{"d_head", d.d_head},       {"d_body", d.d_body},
          {"d_stat", d.d_stat},       {"d_global", d.d_global},
          {"hidden", d.hidden},       {"embedding", d.embedding},
          {"attention", d.attention}, {"vocab", d.vocab},
          {"c_max", d.c_max},         {"p_max", d.p_max}};
}

[[noreturn]] void Corrupt(const std::filesystem::path& path,
                          const std::string& what) {
  throw std::runtime_error("corrupt checkpoint " + path.string() + ": " + what);
}

}  // namespace

void SaveDecoder(const DecoderModel& model, const std::filesystem::path& path,
                 const std::optional<ArtifactStamp>& stamp) {
  DecoderModel& m = const_cast<DecoderModel&>(model);
  Json tensors = Json::array();
  std::string blob;
  m.params.ForEach([&](std::string_view name, Matrix& t) {
    tensors.push_back({{"name", name}, {"rows", t.rows()}, {"cols", t.cols()}});
    for (double v : t.values()) PutU64(blob, std::bit_cast<std::uint64_t>(v));
  });
  Json header = {{"dims", DimsToJson(model.dims)},
                 {"vocab", model.vocab.tokens()},
                 {"tensors", tensors},
                 {"norm", model.norm ? Json::parse(NormStatsToJson(*model.norm))
                                     : Json(nullptr)}};
  if (stamp) header["_meta"] = internal::StampJson(*stamp);
  const std::string text = header.dump();
  std::string out(kMagic, sizeof(kMagic));
  PutU64(out, text.size());
  out += text;
  out += blob;
  internal::WriteFile(path, out);
}

DecoderModel LoadDecoder(const std::filesystem::path& path) {
  const std::string data = internal::ReadFile(path);
  if (data.size() < 16 || data.compare(0, 8, kMagic, 8) != 0) {
    Corrupt(path, "bad magic");
  }
  const std::uint64_t len = GetU64(data, 8);
  if (len > data.size() - 16) Corrupt(path, "header length out of range");
  Json header;
  try {
    header = Json::parse(data.substr(16, len));
  } catch (const Json::exception& e) {
    Corrupt(path, std::string("header: ") + e.what());
  }
  DecoderModel model;
  try {
    const Json& d = header.at("dims");
    DecoderDims& dims = model.dims;
    dims.d_head = d.at("d_head").get<int>();
    dims.d_body = d.at("d_body").get<int>();
    dims.d_stat = d.at("d_stat").get<int>();
    dims.d_global = d.at("d_global").get<int>();
    dims.hidden = d.at("hidden").get<int>();
    dims.embedding = d.at("embedding").get<int>();
    dims.attention = d.at("attention").get<int>();
    dims.vocab = d.at("vocab").get<int>();
    dims.c_max = d.at("c_max").get<int>();
    dims.p_max = d.at("p_max").get<int>();
    const auto tokens = header.at("vocab").get<std::vector<std::string>>();
    const Vocabulary specials{std::vector<std::string>{}};
    if (tokens.size() < static_cast<std::size_t>(specials.size())) {
      Corrupt(path, "vocabulary too short");
    }
    model.vocab = Vocabulary(
        std::vector<std::string>(tokens.begin() + specials.size(), tokens.end()));
    if (model.vocab.tokens() != tokens || model.vocab.size() != dims.vocab) {
      Corrupt(path, "vocabulary does not round-trip");
    }
    if (!header.at("norm").is_null()) {
      model.norm = NormStatsFromJson(header.at("norm").dump());
    }
    const Json& tensors = header.at("tensors");
    std::size_t at = 16 + len;
    std::size_t i = 0;
    model.params.ForEach([&](std::string_view name, Matrix& t) {
      if (i >= tensors.size() || tensors[i].at("name").get<std::string>() != name) {
        Corrupt(path, "tensor list mismatch at " + std::string(name));
      }
      const auto rows = tensors[i].at("rows").get<std::size_t>();
      const auto cols = tensors[i].at("cols").get<std::size_t>();
      if (rows > 0 && cols > (data.size() - at) / 8 / rows) {
        Corrupt(path, "truncated tensor " + std::string(name));
      }
      t = Matrix(rows, cols);
      for (double& v : t.values()) {
        v = std::bit_cast<double>(GetU64(data, at));
        at += 8;
      }
      ++i;
    });
    if (at != data.size()) Corrupt(path, "trailing bytes");
    CheckDecoderShapes(model.params, model.dims);
  } catch (const Json::exception& e) {
    Corrupt(path, e.what());
  } catch (const std::invalid_argument& e) {
    Corrupt(path, e.what());
  }
  return model;
}

}  // namespace grounded
