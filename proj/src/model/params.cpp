#include "drpn/model/params.hpp"

namespace drpn::model {

namespace {

using num::InitKind;
using num::ParamSpec;

class SpecList {
 public:
  explicit SpecList(const ModelConfig& c) : d_(c.d), a_(c.agg_dim) {}

  void mat(const std::string& name, std::size_t r, std::size_t c) { out.push_back({name, r, c, InitKind::kGlorot}); }
  void zeros(const std::string& name, std::size_t r, std::size_t c) { out.push_back({name, r, c, InitKind::kZero}); }
  void ones(const std::string& name, std::size_t r, std::size_t c) { out.push_back({name, r, c, InitKind::kOne}); }

  void multi_head(const std::string& p) {
    for (auto w : {".wq", ".wk", ".wv", ".wo"}) mat(p + w, d_, d_);
  }
  void layer_norm(const std::string& p) {
    ones(p + ".gain", 1, d_);
    zeros(p + ".bias", 1, d_);
  }
  void gated(const std::string& p) {
    mat(p + ".wa", d_, a_);
    zeros(p + ".ba", 1, a_);
    mat(p + ".wg", a_, 1);
  }
  void scorer(const std::string& p) {
    mat(p + ".w1", 2 * d_, d_);
    zeros(p + ".b1", 1, d_);
    mat(p + ".w2", d_, 1);
    zeros(p + ".b2", 1, 1);
  }
  void denoiser(const std::string& p) {
    for (auto w : {".wq", ".wk", ".wv", ".wk_x", ".wv_x"}) mat(p + w, d_, d_);
    scorer(p + ".intra");
    scorer(p + ".inter");
    ones(p + ".gamma", 1, 1);
  }
  void fusion(const std::string& p) {
    gated(p + ".pair.agg");
    for (auto t : {".ps", ".ns", ".ph", ".nh"}) scorer(p + t);
  }

  std::vector<ParamSpec> out;

 private:
  std::size_t d_, a_;
};

MultiHeadIds bind_mh(const num::ParamStore& s, const std::string& p, std::size_t heads) {
  return {s.id(p + ".wq"), s.id(p + ".wk"), s.id(p + ".wv"), s.id(p + ".wo"), heads};
}
LayerNormIds bind_ln(const num::ParamStore& s, const std::string& p) {
  return {s.id(p + ".gain"), s.id(p + ".bias")};
}
GatedAggIds bind_gated(const num::ParamStore& s, const std::string& p) {
  return {s.id(p + ".wa"), s.id(p + ".ba"), s.id(p + ".wg")};
}
ScorerIds bind_scorer(const num::ParamStore& s, const std::string& p) {
  return {s.id(p + ".w1"), s.id(p + ".b1"), s.id(p + ".w2"), s.id(p + ".b2")};
}
DenoiseIds bind_denoiser(const num::ParamStore& s, const std::string& p) {
  DenoiseIds ids;
  ids.wq = s.id(p + ".wq");
  ids.wk = s.id(p + ".wk");
  ids.wv = s.id(p + ".wv");
  ids.wk_x = s.id(p + ".wk_x");
  ids.wv_x = s.id(p + ".wv_x");
  ids.intra_scorer = bind_scorer(s, p + ".intra");
  ids.inter_scorer = bind_scorer(s, p + ".inter");
  ids.gamma = s.id(p + ".gamma");
  return ids;
}
ContentAggIds bind_ca(const num::ParamStore& s, const std::string& p, bool self_attention, const ModelConfig& c) {
  ContentAggIds ids;
  ids.self_attention = self_attention;
  if (self_attention) {
    ids.mh = bind_mh(s, p + ".mh", c.heads);
    ids.ln = bind_ln(s, p + ".ln");
  }
  ids.agg = bind_gated(s, p + ".agg");
  ids.ln_eps = c.ln_eps;
  return ids;
}
FusionIds bind_fusion(const num::ParamStore& s, const std::string& p) {
  return {bind_gated(s, p + ".pair.agg"), bind_scorer(s, p + ".ps"), bind_scorer(s, p + ".ns"),
          bind_scorer(s, p + ".ph"), bind_scorer(s, p + ".nh")};
}

}  // namespace

std::vector<num::ParamSpec> model_param_specs(const ModelConfig& c, std::size_t word_rows, std::size_t news_rows) {
  c.validate();
  SpecList s(c);
  s.mat("emb.word", word_rows, c.d);
  s.mat("emb.news", news_rows, c.d);

  s.multi_head("title.mh");
  s.layer_norm("title.ln");
  s.gated("title.agg");

  for (auto side : {"pos", "neg"}) {
    const std::string sd = side;
    s.multi_head("sem.ca_" + sd + ".mh");
    s.layer_norm("sem.ca_" + sd + ".ln");
    s.gated("sem.ca_" + sd + ".agg");
    s.denoiser("sem.da_" + sd);
  }

  for (auto w : {"graph.w1", "graph.w2", "graph.w3"}) s.mat(w, c.d, c.d);
  s.mat("graph.wf1", 2 * c.d, c.d);
  s.mat("graph.wf2", 2 * c.d, c.d);

  for (auto side : {"pos", "neg"}) {
    const std::string sd = side;
    s.gated("col.ca_" + sd + ".agg");
    s.denoiser("col.da_" + sd);
  }

  s.fusion("fuse_sem");
  s.fusion("fuse_col");
  return s.out;
}

ModelIds bind_model(const num::ParamStore& s, const ModelConfig& c) {
  ModelIds ids;
  ids.title.word_table = s.id("emb.word");
  ids.title.mh = bind_mh(s, "title.mh", c.heads);
  ids.title.ln = bind_ln(s, "title.ln");
  ids.title.agg = bind_gated(s, "title.agg");
  ids.title.ln_eps = c.ln_eps;

  ids.sem_ca_pos = bind_ca(s, "sem.ca_pos", true, c);
  ids.sem_ca_neg = bind_ca(s, "sem.ca_neg", true, c);
  ids.sem_da_pos = bind_denoiser(s, "sem.da_pos");
  ids.sem_da_neg = bind_denoiser(s, "sem.da_neg");

  ids.graph.news_table = s.id("emb.news");
  ids.graph.w1 = s.id("graph.w1");
  ids.graph.w2 = s.id("graph.w2");
  ids.graph.w3 = s.id("graph.w3");
  ids.graph.wf1 = s.id("graph.wf1");
  ids.graph.wf2 = s.id("graph.wf2");
  ids.graph.heads = c.graph_heads;

  ids.col_ca_pos = bind_ca(s, "col.ca_pos", false, c);
  ids.col_ca_neg = bind_ca(s, "col.ca_neg", false, c);
  ids.col_da_pos = bind_denoiser(s, "col.da_pos");
  ids.col_da_neg = bind_denoiser(s, "col.da_neg");

  ids.fuse_sem = bind_fusion(s, "fuse_sem");
  ids.fuse_col = bind_fusion(s, "fuse_col");
  return ids;
}

}  // namespace drpn::model
