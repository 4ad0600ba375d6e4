#include "hyperl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "hyperl/errors.hpp"

namespace hyperl {
namespace {

void write_le_doubles(std::ofstream& out, const std::vector<double>& v) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  } else {
    for (double d : v) {
      auto bits = std::bit_cast<std::uint64_t>(d);
      unsigned char b[8];
      for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
      out.write(reinterpret_cast<const char*>(b), 8);
    }
  }
}

std::vector<double> read_le_doubles(std::ifstream& in, std::size_t count) {
  std::vector<unsigned char> raw(count * 8);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw ConfigError("checkpoint arrays.bin is truncated");
  std::vector<double> out(count);
  for (std::size_t k = 0; k < count; ++k) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(raw[k * 8 + i]) << (8 * i);
    out[k] = std::bit_cast<double>(bits);
  }
  return out;
}

void replace_file(const std::filesystem::path& tmp, const std::filesystem::path& dst) {
  std::filesystem::rename(tmp, dst);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const CheckpointData& data) {
  std::filesystem::create_directories(dir);
  const auto bin_tmp = dir / "arrays.bin.tmp";
  const auto man_tmp = dir / "manifest.txt.tmp";
  std::ostringstream man;
  man << "HYPERL_CHECKPOINT " << data.version << '\n';
  man << "config_hash " << std::hex << data.config_hash << std::dec << '\n';
  man << "seed " << data.seed << '\n';
  man << "episode " << data.episode << '\n';
  man << "global_step " << data.global_step << '\n';
  man << "replay_size " << data.replay_size << '\n';
  man << "replay_cursor " << data.replay_cursor << '\n';
  for (const auto& [name, state] : data.rng) man << "rng " << name << ' ' << state << '\n';
  {
    std::ofstream bin(bin_tmp, std::ios::binary | std::ios::trunc);
    if (!bin) throw ConfigError("cannot write " + bin_tmp.string());
    std::size_t offset = 0;
    for (const auto& a : data.arrays) {
      if (a.name.find_first_of(" \n") != std::string::npos) throw ConfigError("array names must not contain spaces");
      man << "array " << a.name << ' ' << offset << ' ' << a.values.size() << '\n';
      write_le_doubles(bin, a.values);
      offset += a.values.size();
    }
    if (!bin) throw ConfigError("failed writing " + bin_tmp.string());
  }
  man << "config\n" << data.config_text;
  {
    std::ofstream out(man_tmp, std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + man_tmp.string());
    out << man.str();
  }
  replace_file(bin_tmp, dir / "arrays.bin");
  replace_file(man_tmp, dir / "manifest.txt");
}

CheckpointData load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream man(dir / "manifest.txt");
  if (!man) throw ConfigError("no checkpoint at " + dir.string());
  CheckpointData d;
  std::string line;
  if (!std::getline(man, line)) throw ConfigError("empty checkpoint manifest");
  {
    std::istringstream head(line);
    std::string magic;
    head >> magic >> d.version;
    if (magic != "HYPERL_CHECKPOINT" || head.fail()) throw ConfigError("not a checkpoint manifest");
    if (d.version != kCheckpointVersion) {
      throw ConfigError("checkpoint version " + std::to_string(d.version) + " unsupported");
    }
  }
  struct Entry {
    std::string name;
    std::size_t offset, count;
  };
  std::vector<Entry> entries;
  bool saw_config = false;
  while (std::getline(man, line)) {
    if (line == "config") {
      saw_config = true;
      break;
    }
    std::istringstream s(line);
    std::string key;
    s >> key;
    if (key == "config_hash") {
      s >> std::hex >> d.config_hash >> std::dec;
    } else if (key == "seed") {
      s >> d.seed;
    } else if (key == "episode") {
      s >> d.episode;
    } else if (key == "global_step") {
      s >> d.global_step;
    } else if (key == "replay_size") {
      s >> d.replay_size;
    } else if (key == "replay_cursor") {
      s >> d.replay_cursor;
    } else if (key == "rng") {
      std::string name;
      s >> name;
      std::string rest;
      std::getline(s, rest);
      d.rng[name] = rest.size() > 0 && rest[0] == ' ' ? rest.substr(1) : rest;
    } else if (key == "array") {
      Entry e;
      s >> e.name >> e.offset >> e.count;
      entries.push_back(e);
    } else {
      throw ConfigError("unknown checkpoint manifest line: " + line);
    }
    if (s.fail()) throw ConfigError("malformed checkpoint manifest line: " + line);
  }
  if (!saw_config) throw ConfigError("checkpoint manifest lacks the config section");
  std::stringstream rest;
  rest << man.rdbuf();
  d.config_text = rest.str();

  std::ifstream bin(dir / "arrays.bin", std::ios::binary);
  if (!bin) throw ConfigError("checkpoint arrays.bin missing in " + dir.string());
  std::size_t expected = 0;
  for (const auto& e : entries) {
    if (e.offset != expected) throw ConfigError("checkpoint array offsets are not contiguous");
    d.arrays.push_back({e.name, read_le_doubles(bin, e.count)});
    expected += e.count;
  }
  return d;
}

}  // namespace hyperl
