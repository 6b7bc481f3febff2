// SPDX-License-Identifier: Apache-2.0
#include "bat/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "bat/error.hpp"

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace bat {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <class T> void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_record(std::ostream& out, const std::string& name, std::size_t rows, std::size_t cols,
                std::span<const double> data) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put<std::uint32_t>(out, 2);
  put<std::uint64_t>(out, rows);
  put<std::uint64_t>(out, cols);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size_bytes()));
}

class Reader {
public:
  explicit Reader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

  template <class T> T get(const char* what) {
    T v;
    need(sizeof v, what);
    std::memcpy(&v, bytes_.data() + pos_, sizeof v);
    pos_ += sizeof v;
    return v;
  }
  std::string get_string(std::size_t n, const char* what) {
    need(n, what);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  void get_doubles(std::span<double> out, const char* what) {
    need(out.size_bytes(), what);
    std::memcpy(out.data(), bytes_.data() + pos_, out.size_bytes());
    pos_ += out.size_bytes();
  }
  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  [[noreturn]] void fail(const std::string& msg) const {
    throw DataError("checkpoint: " + msg + " at byte offset " + std::to_string(pos_));
  }

private:
  void need(std::size_t n, const char* what) {
    if (remaining() < n)
      fail(std::string("truncated while reading ") + what + " (need " + std::to_string(n) +
           " bytes, have " + std::to_string(remaining()) + ")");
  }
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

} // namespace

void save_checkpoint(const fs::path& path, const ntm::ModelParams& p) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write("BATM", 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ntm::ModelParams::kTensorCount + 1));
  const auto names = ntm::ModelParams::tensor_names();
  const auto tensors = p.tensors();
  for (std::size_t i = 0; i < tensors.size(); ++i)
    put_record(out, names[i], tensors[i]->rows(), tensors[i]->cols(), tensors[i]->flat());
  put_record(out, "background", 1, p.background.size(), p.background);

  const json hyper{{"topics", p.hyper.topics},
                   {"vocab_size", p.hyper.vocab_size},
                   {"hidden", p.hyper.hidden},
                   {"alpha", p.hyper.alpha},
                   {"dropout", p.hyper.dropout}};
  const std::string trailer = hyper.dump();
  put<std::uint64_t>(out, trailer.size());
  out.write(trailer.data(), static_cast<std::streamsize>(trailer.size()));
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

ntm::ModelParams load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  Reader r(std::vector<char>(std::istreambuf_iterator<char>(in), {}));

  if (r.get_string(4, "magic") != "BATM") throw DataError("checkpoint: bad magic at byte offset 0");
  if (const auto version = r.get<std::uint32_t>("version"); version != kCheckpointVersion)
    r.fail("unsupported version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>("record count");

  std::map<std::string, Matrix> records;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint32_t>("record name length");
    if (name_len == 0 || name_len > 4096) r.fail("implausible record name length");
    std::string name = r.get_string(name_len, "record name");
    const auto rank = r.get<std::uint32_t>("record rank");
    if (rank < 1 || rank > 2) r.fail("record '" + name + "' has unsupported rank " + std::to_string(rank));
    std::uint64_t dims[2] = {1, 1};
    for (std::uint32_t d = 0; d < rank; ++d) dims[d] = r.get<std::uint64_t>("record dims");
    const std::uint64_t rows = rank == 2 ? dims[0] : 1;
    const std::uint64_t cols = rank == 2 ? dims[1] : dims[0];
    if (cols != 0 && rows > r.remaining() / 8 / cols)
      r.fail("record '" + name + "' payload exceeds file size");
    Matrix m(rows, cols);
    const std::size_t data_at = r.offset();
    r.get_doubles(m.flat(), "record data");
    for (std::size_t j = 0; j < m.size(); ++j)
      if (!std::isfinite(m[j]))
        throw DataError("checkpoint: non-finite value in '" + name + "' at byte offset " +
                        std::to_string(data_at + 8 * j));
    records.emplace(std::move(name), std::move(m));
  }
  const auto json_len = r.get<std::uint64_t>("trailer length");
  if (json_len > r.remaining()) r.fail("trailer length exceeds file size");
  json hyper_json;
  try {
    hyper_json = json::parse(r.get_string(json_len, "trailer"));
  } catch (const json::exception& e) {
    r.fail(std::string("malformed JSON trailer: ") + e.what());
  }
  if (r.remaining() != 0) r.fail("trailing bytes after JSON trailer");

  ntm::ModelHyper h;
  try {
    h.topics = hyper_json.at("topics").get<std::size_t>();
    h.vocab_size = hyper_json.at("vocab_size").get<std::size_t>();
    h.hidden = hyper_json.at("hidden").get<std::size_t>();
    h.alpha = hyper_json.at("alpha").get<double>();
    h.dropout = hyper_json.at("dropout").get<double>();
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint: incomplete hyperparameter trailer: ") + e.what());
  }
  auto bg = records.find("background");
  if (bg == records.end()) throw DataError("checkpoint: missing record 'background'");
  ntm::ModelParams p;
  try {
    p = ntm::ModelParams::zeros(h, std::vector<double>(bg->second.flat().begin(), bg->second.flat().end()));
  } catch (const std::exception& e) {
    throw DataError(std::string("checkpoint: inconsistent hyperparameters: ") + e.what());
  }
  const auto names = ntm::ModelParams::tensor_names();
  auto tensors = p.tensors();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    auto it = records.find(names[i]);
    if (it == records.end()) throw DataError(std::string("checkpoint: missing record '") + names[i] + "'");
    if (!it->second.same_shape(*tensors[i]))
      throw DataError(std::string("checkpoint: record '") + names[i] + "' has shape " +
                      std::to_string(it->second.rows()) + "x" + std::to_string(it->second.cols()) +
                      ", expected " + std::to_string(tensors[i]->rows()) + "x" +
                      std::to_string(tensors[i]->cols()));
    *tensors[i] = std::move(it->second);
  }
  return p;
}

} // namespace bat
