#include "quip/serialize.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "quip/errors.hpp"

namespace quip {

namespace {
constexpr const char* kMagic = "quip-weights";
constexpr int kVersion = 1;

std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw NumericFault("cannot format value");
  return std::string(buf.data(), end);
}

double parse_double(const std::string& token, std::size_t line) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || end != token.data() + token.size()) {
    throw ParseError("malformed number '" + token + "'", line);
  }
  return v;
}
}  // namespace

void write_weights(std::ostream& out, const ParameterSet& params) {
  out << kMagic << ' ' << kVersion << '\n';
  out << "params " << params.size() << '\n';
  for (const auto& p : params) {
    out << "param " << p.name << ' ' << p.tensor.rank();
    for (std::size_t d : p.tensor.shape()) out << ' ' << d;
    out << '\n';
    const auto values = p.tensor.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) out << ' ';
      out << format_double(values[i]);
    }
    out << '\n';
  }
}

void save_weights(const std::filesystem::path& path, const ParameterSet& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  write_weights(out, params);
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

std::vector<StoredTensor> read_weights(std::istream& in) {
  std::size_t line_no = 0;
  std::string line;
  auto next_line = [&]() -> std::istringstream {
    if (!std::getline(in, line)) throw ParseError("unexpected end of weight file", line_no + 1);
    ++line_no;
    return std::istringstream(line);
  };

  {
    auto header = next_line();
    std::string magic;
    int version = 0;
    if (!(header >> magic >> version) || magic != kMagic) throw ParseError("not a weight file", line_no);
    if (version != kVersion) throw ParseError("unsupported weight file version " + std::to_string(version), line_no);
  }
  std::size_t count = 0;
  {
    auto ls = next_line();
    std::string tag;
    if (!(ls >> tag >> count) || tag != "params") throw ParseError("expected 'params <count>'", line_no);
  }

  std::vector<StoredTensor> stored;
  stored.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    StoredTensor t;
    auto ls = next_line();
    std::string tag;
    std::size_t rank = 0;
    if (!(ls >> tag >> t.name >> rank) || tag != "param") throw ParseError("expected 'param <name> <rank> ...'", line_no);
    t.shape.resize(rank);
    for (auto& d : t.shape) {
      if (!(ls >> d) || d == 0) throw ParseError("bad dimension for '" + t.name + "'", line_no);
    }
    auto vs = next_line();
    std::string token;
    while (vs >> token) t.values.push_back(parse_double(token, line_no));
    if (t.values.size() != shape_size(t.shape)) {
      throw ParseError("'" + t.name + "' declares shape " + shape_string(t.shape) + " but has " +
                           std::to_string(t.values.size()) + " values",
                       line_no);
    }
    stored.push_back(std::move(t));
  }
  return stored;
}

std::vector<StoredTensor> load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open weight file '" + path.string() + "'");
  return read_weights(in);
}

void assign_weights(ParameterSet& params, const std::vector<StoredTensor>& stored) {
  if (stored.size() != params.size()) {
    throw DimensionError("weight file holds " + std::to_string(stored.size()) + " parameters, model expects " +
                         std::to_string(params.size()));
  }
  // Validate everything before touching any value.
  for (std::size_t i = 0; i < stored.size(); ++i) {
    const auto& p = params[i];
    if (stored[i].name != p.name) {
      throw DimensionError("weight file parameter '" + stored[i].name + "' where model expects '" + p.name + "'");
    }
    if (stored[i].shape != p.tensor.shape()) {
      throw DimensionError("parameter '" + p.name + "': weight file shape " + shape_string(stored[i].shape) +
                           " vs model shape " + shape_string(p.tensor.shape()));
    }
  }
  for (std::size_t i = 0; i < stored.size(); ++i) {
    auto dst = params[i].tensor.mutable_values();
    std::copy(stored[i].values.begin(), stored[i].values.end(), dst.begin());
  }
}

}  // namespace quip
