#include "a2d/harness.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace a2d {

namespace {

constexpr char kMagic[8] = {'A', '2', 'D', 'L', 'A', 'B', 'C', 'K'};

}  // namespace

std::string checkpoint_bytes(const Session& s) {
  io::Writer body;
  body.str(s.config.to_json());
  body.rng(s.train_rng);
  body.rng(s.eval_rng);
  save_loop_state(body, s.loop);
  s.trainer->save(body);

  io::Writer head;
  head.u64(kCheckpointVersion);
  head.u64(body.bytes().size());
  head.u64(io::fnv1a(body.bytes()));
  return std::string(kMagic, sizeof kMagic) + head.bytes() + body.bytes();
}

Session session_from_bytes(const std::string& bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw CorruptFileError("not a checkpoint file");
  const std::string rest = bytes.substr(sizeof kMagic);
  io::Reader head(rest);
  const std::uint64_t version = head.u64();
  if (version != kCheckpointVersion)
    throw CorruptFileError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                           std::to_string(kCheckpointVersion) + ")");
  const std::uint64_t length = head.u64();
  const std::uint64_t checksum = head.u64();
  constexpr std::size_t kHead = 24;
  if (rest.size() - kHead != length) throw CorruptFileError("checkpoint is truncated or has trailing bytes");
  const std::string body = rest.substr(kHead);
  if (io::fnv1a(body) != checksum) throw CorruptFileError("checkpoint checksum mismatch");

  io::Reader r(body);
  RunConfig cfg;
  try {
    cfg = RunConfig::from_json(r.str());
  } catch (const ConfigError& e) {
    throw CorruptFileError(std::string("checkpoint config is invalid: ") + e.what());
  }
  Session s = Session::create(cfg);
  r.rng(s.train_rng);
  r.rng(s.eval_rng);
  s.loop = load_loop_state(r);
  if (s.loop.best_params.size() != 0 && s.loop.best_params.size() != s.trainer->policy_params().size())
    throw CorruptFileError("checkpoint best parameters have the wrong size");
  s.trainer->load(r);
  if (!r.done()) throw CorruptFileError("checkpoint has unread trailing data");
  return s;
}

void save_checkpoint(const std::string& path, const Session& s) {
  const std::string bytes = checkpoint_bytes(s);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint '" + tmp + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write on checkpoint '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw std::runtime_error("cannot move checkpoint into '" + path + "'");
}

Session load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptFileError("cannot open checkpoint '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return session_from_bytes(ss.str());
}

}  // namespace a2d
