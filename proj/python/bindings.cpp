#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <sstream>

#include "drpn/cli/app.hpp"
#include "drpn/cli/gradcheck_suite.hpp"
#include "drpn/cli/run_config.hpp"
#include "drpn/errors.hpp"
#include "drpn/eval/attention.hpp"
#include "drpn/eval/metrics.hpp"
#include "drpn/numerics/checkpoint.hpp"
#include "drpn/training/trainer.hpp"

namespace py = pybind11;
using namespace drpn;

namespace {

// A trained model together with the dataset it was trained on.
class Model {
 public:
  Model(const std::string& checkpoint, const std::optional<std::string>& data) {
    auto cfg = cli::RunConfig::from_header(num::load_checkpoint(checkpoint).header);
    if (data) cfg.set("data", *data);
    if (cfg.text("data").empty()) throw ConfigError("checkpoint names no dataset; pass data=");
    data_ = ingest::load_dataset(cfg.text("data"), cfg.rebuild());
    loaded_ = training::load_model(checkpoint, data_);
    net_ = std::make_unique<model::Drpn>(loaded_.config, loaded_.params, loaded_.index);
  }

  std::vector<double> score(const std::string& user, const std::vector<std::string>& news) const {
    const auto history = model::make_history(loaded_.index, data_.profiles.lookup(user));
    std::vector<model::NewsRef> refs;
    for (const auto& id : news) refs.push_back(loaded_.index.lookup(id));
    num::Tape tape(loaded_.params);
    const auto s = net_->score(tape, net_->encode_user(tape, history), refs).value();
    return {s.values().begin(), s.values().end()};
  }

  std::vector<py::dict> attention(const std::string& user) const {
    std::vector<py::dict> out;
    for (const auto& e : eval::attention_weights(*net_, loaded_.params, data_.profiles, user, &data_.catalog)) {
      py::dict d;
      d["sequence"] = e.sequence;
      d["position"] = e.position;
      d["news_id"] = e.news_id;
      d["alpha"] = e.alpha;
      d["category"] = e.category;
      out.push_back(d);
    }
    return out;
  }

  const std::map<std::string, std::string>& header() const { return loaded_.header; }
  std::vector<std::string> users() const {
    std::vector<std::string> out;
    for (const auto& [id, p] : data_.profiles.users()) out.push_back(id);
    return out;
  }

 private:
  ingest::Dataset data_;
  training::LoadedModel loaded_;
  std::unique_ptr<model::Drpn> net_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "News recommendation with denoised positive and negative implicit feedback";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_OSError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);

  m.def(
      "run",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "drpn");
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run a drpn command line; returns (exit code, stdout, stderr).");

  using Scores = std::vector<double>;
  using Labels = std::vector<int>;
  m.def("auc", [](const Scores& s, const Labels& l) { return eval::auc(s, l); }, py::arg("scores"),
        py::arg("labels"), "None when the impression lacks a click or a skip.");
  m.def("mrr", [](const Scores& s, const Labels& l) { return eval::mrr(s, l); }, py::arg("scores"),
        py::arg("labels"));
  m.def("ndcg", [](const Scores& s, const Labels& l, std::size_t k) { return eval::ndcg(s, l, k); },
        py::arg("scores"), py::arg("labels"), py::arg("k"));

  m.def(
      "gradcheck",
      [](const std::string& scope, double tol, std::uint64_t seed) {
        std::vector<py::tuple> out;
        for (const auto& c : cli::run_gradchecks(cli::parse_scope(scope), tol, seed))
          out.push_back(py::make_tuple(c.name, c.report.checked, c.report.max_rel_error, c.report.passed()));
        return out;
      },
      py::arg("scope") = "op", py::arg("tol") = 1e-4, py::arg("seed") = 1,
      "Gradient checks; returns (name, coordinates, max relative error, passed) per case.");

  py::class_<Model>(m, "Model")
      .def(py::init<const std::string&, const std::optional<std::string>&>(), py::arg("checkpoint"),
           py::arg("data") = std::nullopt)
      .def("score", &Model::score, py::arg("user"), py::arg("news"))
      .def("attention", &Model::attention, py::arg("user"))
      .def_property_readonly("header", &Model::header)
      .def_property_readonly("users", &Model::users);
}
