#include "shlb/saliency.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>

#include "shlb/error.h"
#include "shlb/training.h"

namespace shlb {
namespace {

template <typename Scalar>
Tensor<Scalar> as_batch(const Tensor<Scalar>& window) {
  if (window.rank() != 2) {
    throw ShapeError("input", "expected a single [T, S] window, got " +
                                  shape_string(window.shape()));
  }
  return window.reshaped({1, window.dim(0), window.dim(1)});
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::vector<double> gradcam_map(std::span<const double> activation,
                                std::span<const double> gradient, std::size_t length,
                                std::size_t channels) {
  if (activation.size() != length * channels || gradient.size() != activation.size()) {
    throw ShapeError("", "grad-cam activation/gradient size mismatch");
  }
  std::vector<double> alpha(channels, 0.0);
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t c = 0; c < channels; ++c) alpha[c] += gradient[t * channels + c];
  }
  for (auto& a : alpha) a /= static_cast<double>(length);
  std::vector<double> map(length, 0.0);
  for (std::size_t t = 0; t < length; ++t) {
    double v = 0.0;
    for (std::size_t c = 0; c < channels; ++c) v += alpha[c] * activation[t * channels + c];
    map[t] = std::max(v, 0.0);
  }
  return map;
}

std::vector<double> resample(std::span<const double> map, std::size_t length) {
  if (map.size() == length) return {map.begin(), map.end()};
  if (map.empty()) throw InvalidArgument("resample: empty map");
  std::vector<double> out(length);
  for (std::size_t i = 0; i < length; ++i) {
    const double x = length == 1 ? 0.0
                                 : static_cast<double>(i) * static_cast<double>(map.size() - 1) /
                                       static_cast<double>(length - 1);
    const auto lo = static_cast<std::size_t>(std::floor(x));
    const std::size_t hi = std::min(lo + 1, map.size() - 1);
    const double f = x - static_cast<double>(lo);
    out[i] = map[lo] * (1.0 - f) + map[hi] * f;
  }
  return out;
}

template <typename Scalar>
std::vector<double> grad_cam(Model<Scalar>& model, const Tensor<Scalar>& window,
                             std::size_t class_index) {
  const std::size_t classes = model.spec().num_classes;
  if (class_index >= classes) {
    throw InvalidArgument("class index " + std::to_string(class_index) + " out of range for " +
                          std::to_string(classes) + " classes");
  }
  auto& encoder = model.encoder();
  encoder.set_capture(model.gradcam_layer());
  model.forward(as_batch(window), Head::kClassifier);
  Tensor<Scalar> seed({1, classes});
  seed[class_index] = Scalar(1);
  BackwardOptions options;
  options.accumulate_parameter_grads = false;
  model.backward_from_logits(seed, options);
  const auto& a = encoder.captured_activation();
  const auto& g = encoder.captured_gradient();
  const std::vector<double> act(a.values().begin(), a.values().end());
  const std::vector<double> grad(g.values().begin(), g.values().end());
  encoder.set_capture(std::nullopt);
  return resample(gradcam_map(act, grad, a.dim(1), a.dim(2)), window.dim(0));
}

template <typename Scalar>
AttributionMap guided_gradcam(Model<Scalar>& model, const Tensor<Scalar>& window,
                              std::size_t class_index) {
  const auto cam = grad_cam(model, window, class_index);
  AttributionMap out;
  out.class_index = class_index;
  {
    const auto probs = model.forward(as_batch(window), Head::kClassifier);
    out.predicted = static_cast<std::size_t>(
        std::max_element(probs.values().begin(), probs.values().end()) - probs.values().begin());
  }
  const auto guided = guided_backward(model, class_index, window);
  const std::size_t t_len = window.dim(0), s = window.dim(1);
  out.values = Tensor<double>({t_len, s});
  for (std::size_t t = 0; t < t_len; ++t) {
    for (std::size_t c = 0; c < s; ++c) {
      out.values.at(t, c) = static_cast<double>(guided.at(t, c)) * cam[t];
    }
  }
  return out;
}

ChannelDistribution channel_distribution(const Tensor<double>& attribution) {
  const std::size_t t_len = attribution.dim(0), s = attribution.dim(1);
  ChannelDistribution out{std::vector<double>(s, 0.0), false};
  for (std::size_t t = 0; t < t_len; ++t) {
    for (std::size_t c = 0; c < s; ++c) out.weights[c] += std::abs(attribution.at(t, c));
  }
  const double total = std::accumulate(out.weights.begin(), out.weights.end(), 0.0);
  if (!(total > 0.0) || !std::isfinite(total)) {
    std::fill(out.weights.begin(), out.weights.end(), 1.0 / static_cast<double>(s));
    out.uniform_fallback = true;
    return out;
  }
  for (auto& w : out.weights) w /= total;
  return out;
}

double attribution_entropy(std::span<const double> distribution) {
  double h = 0.0;
  for (double p : distribution) {
    if (p > 0.0) h -= p * std::log2(p);
  }
  return std::max(h, 0.0);
}

template <typename Scalar>
GlobalAttribution global_attributions(Model<Scalar>& model, const WindowSet& windows,
                                      const std::string& framework) {
  GlobalAttribution out;
  out.framework = framework;
  out.channel_names = windows.channel_names;
  const std::size_t s = windows.channels;
  const auto predictions = predict(model, windows);
  std::vector<std::vector<double>> sums(windows.activities.size(), std::vector<double>(s, 0.0));
  std::vector<double> entropy(windows.activities.size(), 0.0);
  std::vector<std::size_t> counts(windows.activities.size(), 0);

  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto& w = windows.windows[i];
    if (predictions[i] != w.activity) continue;
    Tensor<Scalar> x({windows.window_length, s});
    std::copy(w.values.begin(), w.values.end(), x.data());
    const auto map = guided_gradcam(model, x, w.activity);
    const auto dist = channel_distribution(map.values);
    if (dist.uniform_fallback) ++out.uniform_fallbacks;
    for (std::size_t c = 0; c < s; ++c) sums[w.activity][c] += dist.weights[c];
    entropy[w.activity] += attribution_entropy(dist.weights);
    ++counts[w.activity];
  }

  std::vector<std::size_t> present(windows.activities.size(), 0);
  for (const auto& w : windows.windows) ++present[w.activity];
  for (std::size_t a = 0; a < windows.activities.size(); ++a) {
    if (counts[a] == 0) {
      if (present[a] > 0) out.omitted_activities.push_back(windows.activities[a]);
      continue;
    }
    ActivityAttribution entry;
    entry.activity = a;
    entry.name = windows.activities[a];
    entry.windows = counts[a];
    entry.distribution = sums[a];
    for (auto& v : entry.distribution) v /= static_cast<double>(counts[a]);
    entry.entropy_bits = entropy[a] / static_cast<double>(counts[a]);
    out.activities.push_back(std::move(entry));
  }
  return out;
}

CsvTable local_attribution_table(const AttributionMap& map,
                                 const std::vector<std::string>& channel_names) {
  CsvTable t;
  t.header = {"t", "channel", "value"};
  for (std::size_t i = 0; i < map.values.dim(0); ++i) {
    for (std::size_t c = 0; c < map.values.dim(1); ++c) {
      t.add_row({std::to_string(i), c < channel_names.size() ? channel_names[c] : std::to_string(c),
                 format_double(map.values.at(i, c))});
    }
  }
  return t;
}

CsvTable global_heatmap_table(std::span<const GlobalAttribution> results) {
  CsvTable t;
  t.header = {"framework", "activity", "channel", "weight"};
  for (const auto& r : results) {
    for (const auto& a : r.activities) {
      for (std::size_t c = 0; c < a.distribution.size(); ++c) {
        t.add_row({r.framework, a.name, r.channel_names.at(c), format_double(a.distribution[c])});
      }
    }
  }
  return t;
}

CsvTable entropy_table(std::span<const GlobalAttribution> results) {
  CsvTable t;
  t.header = {"framework", "activity", "H_bits"};
  for (const auto& r : results) {
    for (const auto& a : r.activities) t.add_row({r.framework, a.name, format_double(a.entropy_bits)});
  }
  return t;
}

void write_heatmap_svg(const std::filesystem::path& path, const GlobalAttribution& result) {
  constexpr int cell = 48, left = 140, top = 40;
  const int cols = static_cast<int>(result.channel_names.size());
  const int rows = static_cast<int>(result.activities.size());
  double peak = 0.0;
  for (const auto& a : result.activities) {
    for (double v : a.distribution) peak = std::max(peak, v);
  }
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" "
      "font-family=\"sans-serif\" font-size=\"11\">\n",
      left + cols * cell + 10, top + rows * cell + 10);
  out << fmt::format("<text x=\"4\" y=\"16\" font-size=\"13\">{}</text>\n",
                     xml_escape(result.framework));
  for (int c = 0; c < cols; ++c) {
    out << fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
                       left + c * cell + cell / 2, top - 6, xml_escape(result.channel_names[c]));
  }
  for (int r = 0; r < rows; ++r) {
    const auto& a = result.activities[r];
    out << fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", left - 6,
                       top + r * cell + cell / 2 + 4, xml_escape(a.name));
    for (int c = 0; c < cols; ++c) {
      const double v = a.distribution[c];
      const double level = peak > 0.0 ? v / peak : 0.0;
      const int fade = static_cast<int>(std::lround(255.0 * (1.0 - level)));
      out << fmt::format(
          "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"rgb(255,{},{})\" "
          "stroke=\"#ccc\"><title>{:.4f}</title></rect>\n",
          left + c * cell, top + r * cell, cell, cell, fade, fade, v);
    }
  }
  out << "</svg>\n";
}

#define SHLB_INSTANTIATE(T)                                                                  \
  template std::vector<double> grad_cam(Model<T>&, const Tensor<T>&, std::size_t);          \
  template AttributionMap guided_gradcam(Model<T>&, const Tensor<T>&, std::size_t);         \
  template GlobalAttribution global_attributions(Model<T>&, const WindowSet&, const std::string&);

SHLB_INSTANTIATE(float)
SHLB_INSTANTIATE(double)
#undef SHLB_INSTANTIATE

}  // namespace shlb
