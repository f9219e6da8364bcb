#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "vids/error.hpp"
#include "vids/nn.hpp"

namespace vids {
namespace {

constexpr std::string_view kMagic = "vids-densenet";
constexpr int kVersion = 1;

void write_hex(std::ostream& os, double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::hex);
  (void)ec;
  os << ' ' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
}

double read_hex(std::istream& is) {
  std::string tok;
  if (!(is >> tok)) throw ParseError("checkpoint: unexpected end of file");
  std::string_view s = tok;
  bool neg = false;
  if (!s.empty() && s.front() == '-') {
    neg = true;
    s.remove_prefix(1);
  }
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, std::chars_format::hex);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError("checkpoint: bad value '" + tok + "'");
  return neg ? -v : v;
}

void expect(std::istream& is, std::string_view word) {
  std::string tok;
  if (!(is >> tok) || tok != word)
    throw ParseError("checkpoint: expected '" + std::string(word) + "', got '" + tok + "'");
}

}  // namespace

void save_checkpoint(const DenseNet& net, std::ostream& os) {
  os << kMagic << ' ' << kVersion << '\n';
  os << "layers " << net.layers().size() << '\n';
  for (const Layer& l : net.layers()) {
    os << "layer " << l.in << ' ' << l.out << ' ' << activation_name(l.act) << '\n';
    os << 'w';
    for (double v : l.weights) write_hex(os, v);
    os << "\nb";
    for (double v : l.bias) write_hex(os, v);
    os << '\n';
  }
}

DenseNet load_checkpoint(std::istream& is) {
  expect(is, kMagic);
  int version = 0;
  if (!(is >> version) || version != kVersion) throw ParseError("checkpoint: unsupported version");
  expect(is, "layers");
  std::size_t count = 0;
  if (!(is >> count)) throw ParseError("checkpoint: missing layer count");
  std::vector<Layer> layers;
  for (std::size_t i = 0; i < count; ++i) {
    Layer l;
    std::string act;
    expect(is, "layer");
    if (!(is >> l.in >> l.out >> act)) throw ParseError("checkpoint: bad layer header");
    l.act = parse_activation(act);
    expect(is, "w");
    l.weights.resize(l.in * l.out);
    for (double& v : l.weights) v = read_hex(is);
    expect(is, "b");
    l.bias.resize(l.out);
    for (double& v : l.bias) v = read_hex(is);
    layers.push_back(std::move(l));
  }
  return DenseNet(std::move(layers));
}

void save_checkpoint(const DenseNet& net, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write checkpoint '" + path + "'");
  save_checkpoint(net, os);
  if (!os) throw IoError("failed writing checkpoint '" + path + "'");
}

DenseNet load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint '" + path + "'");
  return load_checkpoint(is);
}

}  // namespace vids
