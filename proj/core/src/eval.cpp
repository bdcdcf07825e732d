#include "tapret/eval.hpp"

#include <algorithm>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "tapret/objective.hpp"

namespace tapret {

void GroundTruth::validate() const {
  for (std::size_t c = 0; c < caption_to_audio.size(); ++c) {
    const int a = caption_to_audio[c];
    if (a < 0 || static_cast<std::size_t>(a) >= audio_to_captions.size()) {
      throw std::invalid_argument("ground truth: caption " + std::to_string(c) + " maps to missing audio");
    }
    const auto& caps = audio_to_captions[a];
    if (std::find(caps.begin(), caps.end(), static_cast<int>(c)) == caps.end()) {
      throw std::invalid_argument("ground truth: maps are inconsistent for caption " + std::to_string(c));
    }
  }
  std::size_t total = 0;
  for (const auto& caps : audio_to_captions) {
    if (caps.empty()) throw std::invalid_argument("ground truth: audio without captions");
    total += caps.size();
  }
  if (total != caption_to_audio.size()) {
    throw std::invalid_argument("ground truth: caption counts disagree between maps");
  }
}

GroundTruth ground_truth(const RetrievalDataset& ds) {
  GroundTruth gt;
  for (std::size_t a = 0; a < ds.items.size(); ++a) {
    gt.audio_ids.push_back(ds.items[a].id);
    std::vector<int> caps;
    for (const Caption& c : ds.items[a].captions) {
      caps.push_back(static_cast<int>(gt.caption_to_audio.size()));
      gt.caption_to_audio.push_back(static_cast<int>(a));
      gt.caption_ids.push_back(c.id);
    }
    gt.audio_to_captions.push_back(std::move(caps));
  }
  gt.validate();
  return gt;
}

std::string to_string(Direction d) { return d == Direction::T2A ? "t2a" : "a2t"; }

double DirectionReport::at(int k) const {
  for (const auto& [kk, v] : r_at) {
    if (kk == k) return v;
  }
  throw std::invalid_argument("report has no recall value for k=" + std::to_string(k));
}

namespace {

// 1-based rank of candidate `target` within one score vector; a candidate
// precedes the target when it scores higher, or ties with a lower index.
int rank_of(const Tensor& s, bool row_query, std::size_t query, std::size_t target) {
  const std::size_t n = row_query ? s.cols() : s.rows();
  auto score = [&](std::size_t c) { return row_query ? s.at(query, c) : s.at(c, query); };
  const double st = score(target);
  int rank = 1;
  for (std::size_t c = 0; c < n; ++c) {
    if (c == target) continue;
    const double sc = score(c);
    if (sc > st || (sc == st && c < target)) ++rank;
  }
  return rank;
}

}  // namespace

DirectionReport recall_at_k(const Tensor& scores, const GroundTruth& gt,
                            const std::vector<int>& ks, Direction dir) {
  if (scores.rank() != 2) throw std::invalid_argument("recall_at_k: scores must be rank-2");
  const std::size_t n_t = scores.rows(), n_a = scores.cols();
  if (n_t != gt.caption_to_audio.size() || n_a != gt.audio_to_captions.size()) {
    throw std::invalid_argument("recall_at_k: score shape " + scores.shape_str() +
                                " does not match ground truth");
  }
  const std::size_t candidates = dir == Direction::T2A ? n_a : n_t;
  for (int k : ks) {
    if (k < 1 || static_cast<std::size_t>(k) > candidates) {
      throw std::invalid_argument("recall_at_k: k=" + std::to_string(k) + " exceeds candidate count " +
                                  std::to_string(candidates));
    }
  }

  DirectionReport rep;
  rep.direction = dir;
  std::vector<int> best_rank;
  if (dir == Direction::T2A) {
    rep.num_queries = static_cast<int>(n_t);
    best_rank.reserve(n_t);
    for (std::size_t c = 0; c < n_t; ++c) {
      best_rank.push_back(rank_of(scores, true, c, static_cast<std::size_t>(gt.caption_to_audio[c])));
    }
  } else {
    rep.num_queries = static_cast<int>(n_a);
    best_rank.reserve(n_a);
    for (std::size_t a = 0; a < n_a; ++a) {
      int best = static_cast<int>(n_t) + 1;
      for (int c : gt.audio_to_captions[a]) {
        best = std::min(best, rank_of(scores, false, a, static_cast<std::size_t>(c)));
      }
      best_rank.push_back(best);
    }
  }

  for (int k : ks) {
    int hits = 0;
    for (int r : best_rank) {
      if (r <= k) ++hits;
    }
    rep.r_at.emplace_back(k, static_cast<double>(hits) / static_cast<double>(rep.num_queries));
  }
  return rep;
}

RetrievalReport evaluate_retrieval(const Tensor& scores, const GroundTruth& gt,
                                   const std::vector<int>& ks) {
  return {recall_at_k(scores, gt, ks, Direction::T2A), recall_at_k(scores, gt, ks, Direction::A2T)};
}

Tensor score_matrix_eval(const RetrievalDataset& ds, const ModelParams& params, Pooling pooling,
                         int tile_pairs, Precision precision) {
  if (ds.items.empty()) throw std::invalid_argument("score_matrix_eval: empty dataset");
  if (tile_pairs < 1) throw std::invalid_argument("score_matrix_eval: tile_pairs must be >= 1");
  const std::size_t n_a = ds.items.size();
  const std::size_t n_t = ds.num_captions();

  // Flatten caption list in ground-truth order.
  std::vector<const Tensor*> caption_tokens;
  caption_tokens.reserve(n_t);
  for (const AudioItem& item : ds.items)
    for (const Caption& c : item.captions) caption_tokens.push_back(&c.tokens);

  Tensor scores({n_t, n_a});
  const std::size_t chunk = std::max<std::size_t>(1, static_cast<std::size_t>(tile_pairs) / n_a);

  if (pooling != Pooling::Tap) {
    // Audio embeddings are text-agnostic: pool once.
    Graph ga(precision);
    ModelVars mv = register_model(ga, params, false);
    std::vector<Var> z_a;
    z_a.reserve(n_a);
    for (const AudioItem& item : ds.items) {
      Var c_a = encode_audio(ga, ga.leaf(item.frames), mv.audio_mlp);
      switch (pooling) {
        case Pooling::Mean: z_a.push_back(pool_mean(ga, c_a)); break;
        case Pooling::Max: z_a.push_back(pool_max(ga, c_a)); break;
        case Pooling::MeanMax: z_a.push_back(pool_meanmax(ga, c_a)); break;
        case Pooling::Tap: break;
      }
    }
    Tensor z_a_mat({n_a, static_cast<std::size_t>(params.d())});
    for (std::size_t j = 0; j < n_a; ++j) {
      const Tensor& z = ga.value(z_a[j]);
      for (std::size_t d = 0; d < z.numel(); ++d) z_a_mat.at(j, d) = z[d];
    }

    for (std::size_t t0 = 0; t0 < n_t; t0 += chunk) {
      const std::size_t t1 = std::min(n_t, t0 + chunk);
      Graph g(precision);
      ModelVars tv = register_model(g, params, false);
      Tensor z_t_mat({t1 - t0, static_cast<std::size_t>(params.d())});
      for (std::size_t t = t0; t < t1; ++t) {
        const Tensor& z = g.value(encode_text(g, g.leaf(*caption_tokens[t]), tv.text_mlp));
        for (std::size_t d = 0; d < z.numel(); ++d) z_t_mat.at(t - t0, d) = z[d];
      }
      Tensor tile = similarity_matrix(z_t_mat, z_a_mat);
      for (std::size_t t = t0; t < t1; ++t)
        for (std::size_t j = 0; j < n_a; ++j) scores.at(t, j) = tile.at(t - t0, j);
    }
    return scores;
  }

  // Text-conditioned pooling: per-tile graph with per-audio K/V projections
  // computed once and shared across the tile's texts.
  for (std::size_t t0 = 0; t0 < n_t; t0 += chunk) {
    const std::size_t t1 = std::min(n_t, t0 + chunk);
    Graph g(precision);
    ModelVars mv = register_model(g, params, false);
    std::vector<TapAudioProj> proj;
    proj.reserve(n_a);
    for (const AudioItem& item : ds.items) {
      Var c_a = encode_audio(g, g.leaf(item.frames), mv.audio_mlp);
      proj.push_back(tap_project_audio(g, c_a, mv.tap));
    }
    for (std::size_t t = t0; t < t1; ++t) {
      Var c_t = encode_text(g, g.leaf(*caption_tokens[t]), mv.text_mlp);
      Var zt_n = g.l2_normalize_rows(c_t);
      Var q = tap_project_text(g, c_t, mv.tap);
      for (std::size_t j = 0; j < n_a; ++j) {
        Var z = tap_attend(g, q, proj[j], mv.tap).z;
        Var s = g.matmul(zt_n, g.transpose(g.l2_normalize_rows(z)));
        scores.at(t, j) = g.scalar(s);
      }
    }
  }
  return scores;
}

std::string report_csv(const RetrievalReport& report) {
  std::ostringstream os;
  os << "direction,k,recall,num_queries\n";
  for (const DirectionReport* d : {&report.t2a, &report.a2t}) {
    for (const auto& [k, v] : d->r_at) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.6f", v);
      os << to_string(d->direction) << ',' << k << ',' << buf << ',' << d->num_queries << '\n';
    }
  }
  return os.str();
}

void print_report(std::ostream& os, const RetrievalReport& report) {
  for (const DirectionReport* d : {&report.t2a, &report.a2t}) {
    for (const auto& [k, v] : d->r_at) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.6f", v);
      os << to_string(d->direction) << "_r@" << k << " = " << buf << '\n';
    }
    os << to_string(d->direction) << "_queries = " << d->num_queries << '\n';
  }
}

}  // namespace tapret
