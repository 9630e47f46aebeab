#include "checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "errors.hpp"

namespace polo {
namespace {

constexpr char kMagic[4] = {'P', 'O', 'L', 'O'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_u64(std::ostream& out, uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_i32(std::ostream& out, int32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

uint32_t get_u32(std::istream& in, const std::filesystem::path& path) {
  uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw_data("truncated checkpoint " + path.string());
  }
  return v;
}
uint64_t get_u64(std::istream& in, const std::filesystem::path& path) {
  uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw_data("truncated checkpoint " + path.string());
  }
  return v;
}
int32_t get_i32(std::istream& in, const std::filesystem::path& path) {
  int32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw_data("truncated checkpoint " + path.string());
  }
  return v;
}

void put_block(std::ostream& out, const std::string& name, const Eigen::MatrixXd& m) {
  put_u32(out, static_cast<uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put_u64(out, static_cast<uint64_t>(m.rows()));
  put_u64(out, static_cast<uint64_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out.write(reinterpret_cast<const char*>(m.row(r).eval().data()),
              static_cast<std::streamsize>(sizeof(double) * m.cols()));
  }
}

void get_block(std::istream& in, const std::filesystem::path& path, const std::string& want_name,
               Eigen::MatrixXd& m) {
  uint32_t len = get_u32(in, path);
  std::string name(len, '\0');
  if (!in.read(name.data(), len)) throw_data("truncated checkpoint " + path.string());
  if (name != want_name) {
    throw_data("checkpoint " + path.string() + ": expected block '" + want_name + "', found '" +
               name + "'");
  }
  uint64_t rows = get_u64(in, path);
  uint64_t cols = get_u64(in, path);
  // Fixed-shape blocks arrive sized; embedding tables arrive empty and adopt
  // the recorded row count.
  if (m.size() != 0) {
    if (rows != static_cast<uint64_t>(m.rows()) || cols != static_cast<uint64_t>(m.cols())) {
      throw_data("checkpoint " + path.string() + ": block '" + name + "' has shape " +
                 std::to_string(rows) + "x" + std::to_string(cols) + ", expected " +
                 std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
  } else {
    if (cols != static_cast<uint64_t>(m.cols())) {
      throw_data("checkpoint " + path.string() + ": block '" + name + "' has " +
                 std::to_string(cols) + " columns, expected " + std::to_string(m.cols()));
    }
    m.resize(static_cast<Eigen::Index>(rows), m.cols());
  }
  std::vector<double> row(cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    if (!in.read(reinterpret_cast<char*>(row.data()),
                 static_cast<std::streamsize>(sizeof(double) * cols))) {
      throw_data("truncated checkpoint " + path.string());
    }
    for (uint64_t c = 0; c < cols; ++c) m(r, static_cast<Eigen::Index>(c)) = row[c];
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const PolicyConfig& cfg,
                     const PolicyParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_runtime("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  put_u32(out, kVersion);
  put_i32(out, cfg.embedding_dim);
  put_i32(out, cfg.lstm_layers);
  put_i32(out, cfg.hidden_dim);
  put_i32(out, cfg.path_length);
  put_i32(out, cfg.train_rollouts);
  put_i32(out, cfg.test_rollouts);
  put_i32(out, cfg.max_actions);
  for (const auto& [name, mat] : param_blocks(params)) put_block(out, name, *mat);
  if (!out) throw_runtime("write failed for checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("cannot open checkpoint " + path.string());
  char magic[4];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw_data(path.string() + " is not a model checkpoint");
  }
  uint32_t version = get_u32(in, path);
  if (version != kVersion) {
    throw_data("checkpoint " + path.string() + " has unsupported version " +
               std::to_string(version));
  }
  Checkpoint ck;
  ck.config.embedding_dim = get_i32(in, path);
  ck.config.lstm_layers = get_i32(in, path);
  ck.config.hidden_dim = get_i32(in, path);
  ck.config.path_length = get_i32(in, path);
  ck.config.train_rollouts = get_i32(in, path);
  ck.config.test_rollouts = get_i32(in, path);
  ck.config.max_actions = get_i32(in, path);
  ck.config.validate();

  const int d = ck.config.embedding_dim;
  const int hid = ck.config.hidden_dim;
  // Pre-size every fixed block so get_block validates shapes; embedding
  // tables stay empty apart from their column count.
  ck.params.entity_embeddings.resize(0, d);
  ck.params.relation_embeddings.resize(0, d);
  ck.params.lstm.resize(ck.config.lstm_layers);
  for (int k = 0; k < ck.config.lstm_layers; ++k) {
    int in_dim = k == 0 ? 2 * d : d;
    ck.params.lstm[k].w_input.setZero(4 * d, in_dim);
    ck.params.lstm[k].w_recurrent.setZero(4 * d, d);
    ck.params.lstm[k].bias.setZero(4 * d, 1);
  }
  ck.params.w1.setZero(hid, 2 * d);
  ck.params.w2.setZero(2 * d, hid);

  for (auto& [name, mat] : param_blocks(ck.params)) get_block(in, path, name, *mat);
  if (in.peek() != std::char_traits<char>::eof()) {
    throw_data("checkpoint " + path.string() + " has trailing bytes");
  }
  return ck;
}

}  // namespace polo
