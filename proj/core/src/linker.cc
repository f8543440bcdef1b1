#include "grounded/linker.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

#include "grounded/activations.h"
#include "grounded/params.h"
#include "json_util.h"

namespace grounded {

using internal::FieldReader;
using internal::Json;

LinkerParams InitLinkerParams(const LinkerDims& d, Rng& rng) {
  LinkerParams p;
  const int tokens = 2 + d.num_names + 1;
  p.embedding = Matrix(tokens, d.embedding);
  p.lstm_w = Matrix(4 * d.hidden, d.embedding + d.hidden);
  p.lstm_b = Matrix(4 * d.hidden, 1);
  p.w_m = Matrix(d.scorer, d.hidden);
  p.w_t = Matrix(d.scorer, d.d_head);
  p.b_s = Matrix(d.scorer, 1);
  p.w_s = Matrix(1, d.scorer);
  p.w_r = Matrix(d.recon, d.d_head);
  p.b_r = Matrix(d.recon, 1);
  p.w_g = Matrix(2, d.recon);
  p.b_g = Matrix(2, 1);
  p.w_n = Matrix(d.num_names + 1, d.recon);
  p.b_n = Matrix(d.num_names + 1, 1);
  for (Matrix* m : {&p.embedding, &p.lstm_w, &p.w_m, &p.w_t, &p.w_s, &p.w_r,
                    &p.w_g, &p.w_n}) {
    XavierInit(*m, rng);
  }
  InitLstmBias(p.lstm_b);
  return p;
}

int Linker::NameIndex(int character_id) const {
  auto it = name_index_.find(character_id);
  return it == name_index_.end() ? dims_.num_names : it->second;
}

namespace {

struct LinkForward {
  LstmCache step1, step2;
  Vec mm;              // W_m m
  std::vector<Vec> a;  // tanh scorer hidden per track
  Vec scores;
  Vec alpha;
  Vec v_att;
  Vec r;
  Vec p_gender;
  Vec p_name;
};

void Forward(const LinkerParams& p, const LinkerDims& d,
             const LinkInstance& inst, LinkForward& f, bool reconstruct) {
  if (inst.tracks.empty()) {
    throw std::invalid_argument("linking needs at least one track");
  }
  const Vec zeros(d.hidden, 0.0);
  const int gender_row = inst.gender == Gender::kMale ? 0 : 1;
  LstmForward(p.lstm_w, p.lstm_b, p.embedding.row(gender_row), zeros, zeros,
              f.step1);
  LstmForward(p.lstm_w, p.lstm_b, p.embedding.row(2 + inst.name), f.step1.h,
              f.step1.c, f.step2);
  f.mm = MatVec(p.w_m, f.step2.h);
  const std::size_t n = inst.tracks.size();
  f.a.assign(n, Vec());
  f.scores.assign(n, 0.0);
  for (std::size_t c = 0; c < n; ++c) {
    Vec z = f.mm;
    MatVecAcc(p.w_t, *inst.tracks[c], z);
    Axpy(1.0, p.b_s.values(), z);
    f.a[c] = Htan(z);
    f.scores[c] = Dot(p.w_s.values(), f.a[c]);
  }
  f.alpha = Softmax(f.scores);
  if (!reconstruct) return;
  f.v_att.assign(d.d_head, 0.0);
  for (std::size_t c = 0; c < n; ++c) Axpy(f.alpha[c], *inst.tracks[c], f.v_att);
  Vec zr(p.b_r.values().begin(), p.b_r.values().end());
  MatVecAcc(p.w_r, f.v_att, zr);
  f.r = Htan(zr);
  Vec gl(p.b_g.values().begin(), p.b_g.values().end());
  MatVecAcc(p.w_g, f.r, gl);
  f.p_gender = Softmax(gl);
  Vec nl(p.b_n.values().begin(), p.b_n.values().end());
  MatVecAcc(p.w_n, f.r, nl);
  f.p_name = Softmax(nl);
}

}  // namespace

LinkResult Linker::Link(const LinkInstance& inst) const {
  LinkForward f;
  Forward(params_, dims_, inst, f, false);
  LinkResult r;
  r.attention = f.alpha;
  r.best = static_cast<int>(ArgMax(f.alpha));
  return r;
}

LinkResult Linker::Link(Gender gender, int character_id,
                        std::span<const Vec* const> tracks) const {
  LinkInstance inst;
  inst.gender = gender;
  inst.name = NameIndex(character_id);
  inst.tracks.assign(tracks.begin(), tracks.end());
  return Link(inst);
}

double Linker::Loss(const LinkInstance& inst, double lambda,
                    LinkerParams* grads) const {
  const LinkerParams& p = params_;
  const LinkerDims& d = dims_;
  LinkForward f;
  Forward(p, d, inst, f, true);
  const int gender = inst.gender == Gender::kMale ? 0 : 1;
  double loss = -std::log(f.p_gender[gender]) - std::log(f.p_name[inst.name]);
  if (inst.supervised) loss -= lambda * std::log(f.alpha[*inst.supervised]);
  if (grads == nullptr) return loss;

  LinkerParams& g = *grads;
  Vec dgl = f.p_gender;
  dgl[gender] -= 1.0;
  Vec dnl = f.p_name;
  dnl[inst.name] -= 1.0;
  AddOuter(g.w_g, dgl, f.r);
  Axpy(1.0, dgl, g.b_g.values());
  AddOuter(g.w_n, dnl, f.r);
  Axpy(1.0, dnl, g.b_n.values());
  Vec dr(d.recon, 0.0);
  MatTVecAcc(p.w_g, dgl, dr);
  MatTVecAcc(p.w_n, dnl, dr);
  for (int k = 0; k < d.recon; ++k) dr[k] *= 1.0 - f.r[k] * f.r[k];
  AddOuter(g.w_r, dr, f.v_att);
  Axpy(1.0, dr, g.b_r.values());
  Vec dv(d.d_head, 0.0);
  MatTVecAcc(p.w_r, dr, dv);

  const std::size_t n = inst.tracks.size();
  Vec dalpha(n);
  for (std::size_t c = 0; c < n; ++c) dalpha[c] = Dot(*inst.tracks[c], dv);
  const double mean = Dot(f.alpha, dalpha);
  Vec ds(n);
  for (std::size_t c = 0; c < n; ++c) ds[c] = f.alpha[c] * (dalpha[c] - mean);
  if (inst.supervised) {
    for (std::size_t c = 0; c < n; ++c) {
      ds[c] += lambda * (f.alpha[c] - (static_cast<int>(c) == *inst.supervised));
    }
  }
  Vec dmm(d.scorer, 0.0);
  for (std::size_t c = 0; c < n; ++c) {
    Axpy(ds[c], f.a[c], g.w_s.values());
    Vec dz(d.scorer);
    for (int k = 0; k < d.scorer; ++k) {
      dz[k] = ds[c] * p.w_s(0, k) * (1.0 - f.a[c][k] * f.a[c][k]);
    }
    AddOuter(g.w_t, dz, *inst.tracks[c]);
    Axpy(1.0, dz, g.b_s.values());
    Axpy(1.0, dz, dmm);
  }
  AddOuter(g.w_m, dmm, f.step2.h);
  Vec dh(d.hidden, 0.0);
  MatTVecAcc(p.w_m, dmm, dh);

  const Vec zeros(d.hidden, 0.0);
  Vec dx(d.embedding), dh1(d.hidden), dc1(d.hidden);
  LstmBackward(p.lstm_w, f.step2, dh, zeros, g.lstm_w, g.lstm_b, dx, dh1, dc1);
  Axpy(1.0, dx, g.embedding.row(2 + inst.name));
  Vec dh0(d.hidden), dc0(d.hidden);
  LstmBackward(p.lstm_w, f.step1, dh1, dc1, g.lstm_w, g.lstm_b, dx, dh0, dc0);
  Axpy(1.0, dx, g.embedding.row(gender));
  return loss;
}

std::vector<LinkInstance> MakeLinkInstances(const Linker& linker,
                                            const Corpus& corpus,
                                            const std::string& split) {
  std::vector<LinkInstance> out;
  for (const Clip& clip : corpus.clips) {
    if (!split.empty() && clip.split != split) continue;
    if (clip.tracks.empty()) continue;
    const bool singleton = clip.tracks.size() == 1 && clip.mentions.size() == 1;
    for (const Mention& m : clip.mentions) {
      LinkInstance inst;
      inst.gender = m.gender;
      inst.name = linker.NameIndex(m.character_id);
      for (const Track& t : clip.tracks) inst.tracks.push_back(&t.v_head);
      if (singleton) inst.supervised = 0;
      out.push_back(std::move(inst));
    }
  }
  return out;
}

Linker TrainLinker(const Corpus& corpus, const LinkerTrainOptions& options,
                   Rng& rng, LinkerTrainReport* report) {
  std::set<int> names;
  int d_head = options.dims.d_head;
  for (const Clip& clip : corpus.clips) {
    if (clip.split != options.train_split) continue;
    for (const Mention& m : clip.mentions) names.insert(m.character_id);
    if (!clip.tracks.empty()) {
      d_head = static_cast<int>(clip.tracks[0].v_head.size());
    }
  }
  if (d_head <= 0) throw std::invalid_argument("linker: no training tracks");
  LinkerDims dims = options.dims;
  dims.d_head = d_head;
  dims.num_names = static_cast<int>(names.size());
  std::map<int, int> index;
  for (int id : names) index.emplace(id, static_cast<int>(index.size()));

  Rng init = rng.Substream("linker/init");
  Linker linker(dims, index, InitLinkerParams(dims, init));
  const auto instances = MakeLinkInstances(linker, corpus, options.train_split);
  if (instances.empty()) throw std::invalid_argument("linker: no mentions");
  LinkerTrainReport local;
  LinkerTrainReport& rep = report ? *report : local;
  rep.instances = static_cast<int>(instances.size());
  rep.supervised_instances = static_cast<int>(
      std::count_if(instances.begin(), instances.end(),
                    [](const LinkInstance& i) { return i.supervised.has_value(); }));
  if (rep.supervised_instances == 0) {
    rep.warnings.push_back(
        "no single-name single-track clips; training fully unsupervised");
  }

  Optimizer opt(options.optimizer);
  LinkerParams grads = ZerosLike(linker.params());
  const auto bound = Bind(linker.params(), grads);
  std::vector<int> order(instances.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle = rng.Substream("linker/shuffle");
  const int batch = std::max(1, options.batch_size);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    shuffle.Shuffle(std::span(order));
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      grads.ForEach([](std::string_view, Matrix& m) { m.Fill(0.0); });
      for (std::size_t k = start; k < end; ++k) {
        total += linker.Loss(instances[order[k]], options.lambda, &grads);
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      grads.ForEach([&](std::string_view, Matrix& m) {
        for (double& v : m.values()) v *= scale;
      });
      opt.Step(bound);
    }
    rep.epoch_loss.push_back(total / static_cast<double>(instances.size()));
  }
  return linker;
}

double LinkingAccuracy(const Linker& linker, const Corpus& corpus,
                       const std::string& split) {
  int total = 0, correct = 0;
  for (const Clip& clip : corpus.clips) {
    if (clip.split != split || clip.tracks.empty()) continue;
    std::vector<const Vec*> tracks;
    for (const Track& t : clip.tracks) tracks.push_back(&t.v_head);
    for (const Mention& m : clip.mentions) {
      if (m.gt_track_ids.empty()) continue;
      const LinkResult r = linker.Link(m.gender, m.character_id, tracks);
      const int id = clip.tracks[r.best].id;
      ++total;
      correct += std::find(m.gt_track_ids.begin(), m.gt_track_ids.end(), id) !=
                 m.gt_track_ids.end();
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / total;
}

LinkedMentions LinkCorpus(const Linker& linker, const Corpus& corpus) {
  LinkedMentions out;
  for (const Clip& clip : corpus.clips) {
    auto& linked = out[clip.id];
    std::vector<const Vec*> tracks;
    for (const Track& t : clip.tracks) tracks.push_back(&t.v_head);
    for (const Mention& m : clip.mentions) {
      if (tracks.empty()) {
        linked.push_back(std::nullopt);
      } else {
        linked.push_back(
            clip.tracks[linker.Link(m.gender, m.character_id, tracks).best].id);
      }
    }
  }
  return out;
}

std::vector<int> LargestTracks(const Clip& clip, int count) {
  std::vector<const Track*> sorted;
  for (const Track& t : clip.tracks) sorted.push_back(&t);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const Track* a, const Track* b) {
                     return a->length() * a->MeanArea() >
                            b->length() * b->MeanArea();
                   });
  std::vector<int> out;
  for (const Track* t : sorted) {
    if (static_cast<int>(out.size()) == count) break;
    out.push_back(t->id);
  }
  return out;
}

std::vector<int> PreviousCandidates(const Clip& previous,
                                    std::span<const std::optional<int>> linked,
                                    int p_max) {
  std::vector<int> out;
  for (const auto& id : linked) {
    if (id && previous.FindTrack(*id) != nullptr &&
        std::find(out.begin(), out.end(), *id) == out.end() &&
        static_cast<int>(out.size()) < p_max) {
      out.push_back(*id);
    }
  }
  if (out.empty()) out = LargestTracks(previous, p_max);
  return out;
}

std::vector<AlphaTarget> BuildAttentionGt(const Corpus& corpus,
                                          const LinkedMentions& linked,
                                          int p_max) {
  static const std::vector<std::optional<int>> kNone;
  auto linked_of = [&](const Clip& c) -> const std::vector<std::optional<int>>& {
    auto it = linked.find(c.id);
    return it == linked.end() ? kNone : it->second;
  };
  std::vector<AlphaTarget> out;
  for (const Clip& clip : corpus.clips) {
    const Clip* prev = corpus.Previous(clip);
    std::vector<int> candidates;
    if (prev != nullptr) {
      candidates = PreviousCandidates(*prev, linked_of(*prev), p_max);
    }
    const auto& mine = linked_of(clip);
    for (std::size_t i = 0; i < clip.mentions.size(); ++i) {
      const Mention& m = clip.mentions[i];
      AlphaTarget t;
      t.pair_id = clip.id;
      t.tau = m.position;
      t.prev_tracks = candidates;
      if (i < mine.size() && mine[i] && clip.FindTrack(*mine[i]) != nullptr) {
        t.c = mine[i];
      }
      if (m.coref_prev && prev != nullptr) {
        const auto& prev_linked = linked_of(*prev);
        for (std::size_t j = 0; j < prev->mentions.size(); ++j) {
          if (prev->mentions[j].character_id != *m.coref_prev) continue;
          if (j < prev_linked.size() && prev_linked[j] &&
              std::find(candidates.begin(), candidates.end(),
                        *prev_linked[j]) != candidates.end()) {
            t.p = *prev_linked[j];
          }
          break;
        }
      }
      out.push_back(std::move(t));
    }
  }
  return out;
}

std::string AlphaTargetToJsonLine(const AlphaTarget& t) {
  Json j = {{"pair_id", t.pair_id},
            {"tau", t.tau},
            {"p", t.p},
            {"c", t.c ? Json(*t.c) : Json(nullptr)},
            {"prev_tracks", t.prev_tracks}};
  return j.dump();
}

std::vector<AlphaTarget> ReadAlphaGt(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<AlphaTarget> out;
  internal::ForEachJsonLine(in, [&](const Json& j, int line) {
    FieldReader r(line, "");
    AlphaTarget t;
    t.pair_id = r.String(r.Require(j, "pair_id"), "pair_id");
    t.tau = static_cast<int>(r.Integer(r.Require(j, "tau"), "tau"));
    t.p = static_cast<int>(r.Integer(r.Require(j, "p"), "p"));
    if (t.p < 0) r.Fail("p", "must be >= 0");
    const Json& c = r.Require(j, "c");
    if (!c.is_null()) {
      t.c = static_cast<int>(r.Integer(c, "c"));
      if (*t.c <= 0) r.Fail("c", "must be a positive track id");
    }
    if (j.contains("prev_tracks")) {
      t.prev_tracks = r.Integers(j["prev_tracks"], "prev_tracks");
    }
    out.push_back(std::move(t));
  });
  return out;
}

void WriteAlphaGt(std::span<const AlphaTarget> targets,
                  const std::filesystem::path& path,
                  const std::optional<ArtifactStamp>& stamp) {
  std::string text;
  if (stamp) text += MetaLine(*stamp) + "\n";
  for (const AlphaTarget& t : targets) text += AlphaTargetToJsonLine(t) + "\n";
  internal::WriteFile(path, text);
}

}  // namespace grounded
