#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "tsnmt/cli.hpp"
#include "tsnmt/corpus.hpp"
#include "tsnmt/errors.hpp"
#include "tsnmt/evaluation.hpp"
#include "tsnmt/metrics.hpp"
#include "tsnmt/model.hpp"
#include "tsnmt/pivot.hpp"

namespace py = pybind11;
using namespace tsnmt;

namespace {

class Translator {
 public:
  Translator(const std::string& model, const std::string& src_vocab, const std::string& tgt_vocab)
      : params_(ModelParams::load(model)), src_(Vocabulary::load(src_vocab)), tgt_(Vocabulary::load(tgt_vocab)) {}

  std::string translate(const std::string& sentence, std::size_t k) const {
    const TokenSequence x = src_.encode(tokenize(sentence));
    if (x.empty()) throw DataError("empty input");
    const auto words = tgt_.decode(direct_decode(params_, x, k));
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) out += (i ? " " : "") + words[i];
    return out;
  }

  py::dict config() const {
    const ModelConfig& c = params_.config();
    py::dict d;
    d["src_vocab"] = c.src_vocab;
    d["tgt_vocab"] = c.tgt_vocab;
    d["embed_dim"] = c.embed_dim;
    d["hidden_dim"] = c.hidden_dim;
    d["attention_dim"] = c.attention_dim;
    return d;
  }

 private:
  ModelParams params_;
  Vocabulary src_, tgt_;
};

py::dict bleu_dict(const BleuReport& r) {
  py::dict d;
  d["bleu"] = r.bleu;
  d["precisions"] = std::vector<double>(r.precisions.begin(), r.precisions.begin() + r.max_order);
  d["brevity_penalty"] = r.brevity_penalty;
  d["hyp_length"] = r.hyp_length;
  d["ref_length"] = r.ref_length;
  d["summary"] = r.summary();
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Teacher-student zero-resource translation lab";

  py::register_exception<Error>(m, "Error");

  m.def(
      "run",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "tsnmt");
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run a tsnmt subcommand; returns (exit_code, stdout, stderr).");

  m.def(
      "corpus_bleu",
      [](const std::vector<std::string>& hyps, const std::vector<std::string>& refs, int max_order, bool lowercase) {
        std::vector<Words> h, r;
        for (const auto& s : hyps) h.push_back(tokenize(s));
        for (const auto& s : refs) r.push_back(tokenize(s));
        return bleu_dict(corpus_bleu(h, r, max_order, lowercase));
      },
      py::arg("hypotheses"), py::arg("references"), py::arg("max_order") = 4, py::arg("lowercase") = false);

  m.def(
      "sentence_bleu",
      [](const std::string& hyp, const std::string& ref) { return sentence_bleu(tokenize(hyp), tokenize(ref)); },
      py::arg("hypothesis"), py::arg("reference"));

  m.def(
      "read_metrics",
      [](const std::filesystem::path& path) {
        const MetricsReadResult r = read_metrics(path);
        py::list records;
        for (const auto& rec : r.records) {
          py::dict d;
          d["run"] = rec.run;
          d["update"] = rec.update;
          d["t"] = rec.t;
          d["metric"] = rec.metric;
          d["value"] = rec.value;
          d["method"] = rec.method;
          records.append(d);
        }
        return py::make_tuple(records, r.malformed);
      },
      py::arg("path"), "Returns (records, malformed_line_count).");

  py::class_<Translator>(m, "Translator")
      .def(py::init<const std::string&, const std::string&, const std::string&>(), py::arg("model"),
           py::arg("src_vocab"), py::arg("tgt_vocab"))
      .def("translate", &Translator::translate, py::arg("sentence"), py::arg("k") = 5)
      .def_property_readonly("config", &Translator::config);
}
