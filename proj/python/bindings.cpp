// SPDX-License-Identifier: Apache-2.0
//
// Python bindings for the jdagg core: corpus utilities, the hashing
// encoder, the description aggregator, the bidirectional loss, retrieval
// metrics, and training/checkpoint entry points.

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "jdagg/aggregator.hpp"
#include "jdagg/corpus.hpp"
#include "jdagg/encoder.hpp"
#include "jdagg/error.hpp"
#include "jdagg/evalsuite.hpp"
#include "jdagg/objective.hpp"
#include "jdagg/trainer.hpp"
#include "jdagg/version.hpp"

namespace py = pybind11;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

jdagg::Tensor tensor_from_array(const FloatArray& array) {
  const auto buf = array.request();
  if (buf.ndim != 2) throw jdagg::UsageError("expected a 2-D float array");
  jdagg::Tensor t;
  t.shape = {static_cast<std::size_t>(buf.shape[0]), static_cast<std::size_t>(buf.shape[1])};
  const auto* data = static_cast<const float*>(buf.ptr);
  t.values.assign(data, data + buf.shape[0] * buf.shape[1]);
  return t;
}

py::array_t<float> array_from_tensor(const jdagg::Tensor& t) {
  py::array_t<float> out({t.rows(), t.cols()});
  std::copy(t.values.begin(), t.values.end(), out.mutable_data());
  return out;
}

py::array_t<float> array_from_vector(const std::vector<float>& v) {
  py::array_t<float> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

jdagg::EmbeddingMatrix matrix_from_array(const FloatArray& array) {
  const auto buf = array.request();
  if (buf.ndim != 2) throw jdagg::UsageError("expected a 2-D float array");
  jdagg::EmbeddingMatrix m;
  m.rows = static_cast<std::size_t>(buf.shape[0]);
  m.dim = static_cast<std::size_t>(buf.shape[1]);
  const auto* data = static_cast<const float*>(buf.ptr);
  m.values.assign(data, data + m.rows * m.dim);
  return m;
}

py::dict posting_to_dict(const jdagg::JobPosting& p) {
  py::dict d;
  d["id"] = p.id;
  d["title"] = p.title;
  d["description"] = p.description;
  d["skills"] = p.skills;
  d["title_language"] = std::string(jdagg::language_name(p.title_language));
  return d;
}

jdagg::TrainConfig config_from_kwargs(std::size_t dim, std::size_t layers, std::size_t heads,
                                      double lr, double tau, std::size_t batch_size,
                                      double warmup, std::size_t epochs, std::uint64_t seed,
                                      double weight_decay, std::size_t max_segments,
                                      std::size_t buckets) {
  jdagg::TrainConfig c;
  c.dim = dim;
  c.layers = layers;
  c.heads = heads;
  c.lr = lr;
  c.tau = tau;
  c.batch_size = batch_size;
  c.warmup_fraction = warmup;
  c.epochs = epochs;
  c.seed = seed;
  c.weight_decay = weight_decay;
  c.max_segments = max_segments;
  c.encoder_buckets = buckets;
  return c;
}

}  // namespace

PYBIND11_MODULE(_jdagg, m) {
  m.doc() = "Job-title representation learning from job descriptions";
  m.attr("__version__") = jdagg::kVersion;

  py::register_exception<jdagg::Error>(m, "JdaggError");

  // corpus
  m.def("segment_description", &jdagg::segment_description, py::arg("description"),
        py::arg("max_segments") = jdagg::kDefaultMaxSegments);
  m.def("detect_language", [](const std::string& title) {
    return std::string(jdagg::language_name(jdagg::detect_language(title)));
  });
  m.def("generate_synthetic_corpus", [](std::size_t n, std::uint64_t seed) {
    py::list out;
    for (const auto& posting : jdagg::generate_synthetic_corpus(n, seed)) {
      out.append(posting_to_dict(posting));
    }
    return out;
  });

  // encoder
  py::class_<jdagg::HashEncoderConfig>(m, "HashEncoderConfig")
      .def(py::init([](std::size_t dim, std::size_t buckets, std::uint64_t seed) {
             jdagg::HashEncoderConfig c{dim, buckets, seed};
             jdagg::validate(c);
             return c;
           }),
           py::arg("dim") = 64, py::arg("buckets") = 1u << 16, py::arg("seed") = 1)
      .def_readonly("dim", &jdagg::HashEncoderConfig::dim)
      .def_readonly("buckets", &jdagg::HashEncoderConfig::buckets)
      .def_readonly("seed", &jdagg::HashEncoderConfig::seed);
  m.def("encode_sentence", [](const std::string& text, const jdagg::HashEncoderConfig& c) {
    return array_from_vector(jdagg::encode_sentence(text, c));
  });
  m.def("encode_segments",
        [](const std::vector<std::string>& segments, const jdagg::HashEncoderConfig& c) {
          const auto matrix = jdagg::encode_segments(segments, c);
          jdagg::Tensor t;
          t.shape = {matrix.rows, matrix.dim};
          t.values = matrix.values;
          return array_from_tensor(t);
        });

  // objective
  m.def("cosine_matrix", [](const FloatArray& h, const FloatArray& f) {
    return array_from_tensor(
        jdagg::cosine_matrix<float>(tensor_from_array(h), tensor_from_array(f)));
  });
  m.def(
      "bidirectional_loss",
      [](const FloatArray& s, double tau) {
        const auto loss = jdagg::bidirectional_loss<float>(tensor_from_array(s), tau);
        return py::make_tuple(loss.value, array_from_tensor(loss.grad));
      },
      py::arg("similarities"), py::arg("tau") = 0.05);

  // metrics
  m.def(
      "recall_at_k",
      [](const std::vector<std::string>& ranked, const std::set<std::string>& relevant,
         std::size_t k) {
        return jdagg::recall_at_k(jdagg::RankedRun{"q", ranked, relevant}, k);
      },
      py::arg("ranked"), py::arg("relevant"), py::arg("k"));
  m.def(
      "average_precision_at_k",
      [](const std::vector<std::string>& ranked, const std::set<std::string>& relevant,
         std::size_t k) {
        return jdagg::average_precision_at_k(jdagg::RankedRun{"q", ranked, relevant}, k);
      },
      py::arg("ranked"), py::arg("relevant"), py::arg("k") = 25);
  m.def("mrr",
        [](const std::vector<std::pair<std::vector<std::string>, std::set<std::string>>>& runs) {
          std::vector<jdagg::RankedRun> converted;
          for (const auto& [ranked, relevant] : runs) {
            converted.push_back(jdagg::RankedRun{"q", ranked, relevant});
          }
          return jdagg::mrr(converted);
        });

  // model
  py::class_<jdagg::TrainedModel>(m, "Model")
      .def_property_readonly("dim",
                             [](const jdagg::TrainedModel& m_) { return m_.encoder.dim; })
      .def_property_readonly("steps",
                             [](const jdagg::TrainedModel& m_) { return m_.final_step; })
      .def("aggregate",
           [](const jdagg::TrainedModel& m_, const FloatArray& segments) {
             return array_from_vector(jdagg::aggregate(matrix_from_array(segments), m_.params));
           })
      .def("aggregate_text",
           [](const jdagg::TrainedModel& m_, const std::vector<std::string>& segments) {
             return array_from_vector(
                 jdagg::aggregate(jdagg::encode_segments(segments, m_.encoder), m_.params));
           })
      .def("encode_title",
           [](const jdagg::TrainedModel& m_, const std::string& title) {
             return array_from_vector(jdagg::encode_sentence(title, m_.encoder));
           })
      .def("attention_map",
           [](const jdagg::TrainedModel& m_, const std::vector<std::string>& segments) {
             return array_from_vector(jdagg::attention_map(
                 jdagg::encode_segments(segments, m_.encoder), m_.params));
           })
      .def("save", [](const jdagg::TrainedModel& m_, const std::string& path) {
        jdagg::save_checkpoint(m_, path);
      });
  m.def("load_model", &jdagg::load_checkpoint);

  m.def(
      "train",
      [](const std::vector<std::tuple<std::string, std::string, std::vector<std::string>>>&
             postings,
         std::size_t dim, std::size_t layers, std::size_t heads, double lr, double tau,
         std::size_t batch_size, double warmup, std::size_t epochs, std::uint64_t seed,
         double weight_decay, std::size_t max_segments, std::size_t buckets) {
        std::vector<jdagg::SegmentedPosting> corpus;
        for (const auto& [id, title, segments] : postings) {
          corpus.push_back(jdagg::SegmentedPosting{id, title, segments, {}});
        }
        std::vector<double> losses;
        auto model = jdagg::train(
            corpus,
            config_from_kwargs(dim, layers, heads, lr, tau, batch_size, warmup, epochs, seed,
                               weight_decay, max_segments, buckets),
            [&](const jdagg::StepRecord& r) { losses.push_back(r.loss); });
        return py::make_tuple(std::move(model), losses);
      },
      py::arg("postings"), py::arg("dim") = 16, py::arg("layers") = 2, py::arg("heads") = 2,
      py::arg("lr") = 1e-3, py::arg("tau") = 0.05, py::arg("batch_size") = 8,
      py::arg("warmup") = 0.1, py::arg("epochs") = 10, py::arg("seed") = 1,
      py::arg("weight_decay") = 0.01, py::arg("max_segments") = 64,
      py::arg("buckets") = 1u << 16,
      "Train the aggregator on (id, title, segments) tuples; returns (model, losses).");

  m.def(
      "train_embedded",
      [](const FloatArray& titles, const std::vector<FloatArray>& descriptions,
         std::size_t layers, std::size_t heads, double lr, double tau, std::size_t batch_size,
         double warmup, std::size_t epochs, std::uint64_t seed, double weight_decay) {
        const jdagg::Tensor title_tensor = tensor_from_array(titles);
        std::vector<std::vector<float>> title_rows;
        for (std::size_t i = 0; i < title_tensor.rows(); ++i) {
          title_rows.emplace_back(
              title_tensor.values.begin() + i * title_tensor.cols(),
              title_tensor.values.begin() + (i + 1) * title_tensor.cols());
        }
        std::vector<jdagg::EmbeddingMatrix> docs;
        for (const auto& d : descriptions) docs.push_back(matrix_from_array(d));
        std::vector<double> losses;
        auto model = jdagg::train_embedded(
            title_rows, docs,
            config_from_kwargs(title_tensor.cols(), layers, heads, lr, tau, batch_size, warmup,
                               epochs, seed, weight_decay, 64, 1u << 16),
            [&](const jdagg::StepRecord& r) { losses.push_back(r.loss); });
        return py::make_tuple(std::move(model), losses);
      },
      py::arg("titles"), py::arg("descriptions"), py::arg("layers") = 2, py::arg("heads") = 2,
      py::arg("lr") = 1e-3, py::arg("tau") = 0.05, py::arg("batch_size") = 8,
      py::arg("warmup") = 0.1, py::arg("epochs") = 10, py::arg("seed") = 1,
      py::arg("weight_decay") = 0.01,
      "Train from precomputed embeddings: titles is N x d, descriptions is a "
      "list of per-posting segment matrices; returns (model, losses).");

  // pooling baselines
  m.def("mean_pool", [](const FloatArray& segments) {
    return array_from_vector(jdagg::mean_pool_aggregate(matrix_from_array(segments)));
  });
  m.def("max_pool", [](const FloatArray& segments) {
    return array_from_vector(jdagg::max_pool_aggregate(matrix_from_array(segments)));
  });
}
