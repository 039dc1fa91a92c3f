#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

namespace fixture {

// CDNOW master file: $BTYD_CDNOW, else the copy under data/.
inline std::optional<std::filesystem::path> cdnow_path() {
  if (const char* env = std::getenv("BTYD_CDNOW")) {
    if (std::filesystem::exists(env)) return std::filesystem::path(env);
  }
  const std::filesystem::path p = BTYD_DATA_DIR "/CDNOW_master.txt";
  if (std::filesystem::exists(p)) return p;
  return std::nullopt;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace fixture
