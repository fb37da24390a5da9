#pragma once

#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace homegate::testutil {

inline std::string src_dir() {
  if (const char* dir = std::getenv("HOMEGATE_SRC_DIR"); dir != nullptr && *dir != 0) {
    return dir;
  }
#ifdef HOMEGATE_DEFAULT_SRC_DIR
  return HOMEGATE_DEFAULT_SRC_DIR;
#else
  return ".";
#endif
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot read " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

// Unique temp directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "homegate") {
    static std::atomic<int> counter{0};
    path_ = (std::filesystem::temp_directory_path() /
             (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++)))
                .string();
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::string& path() const { return path_; }
  std::string file(const std::string& name) const {
    return (std::filesystem::path(path_) / name).string();
  }

 private:
  std::string path_;
};

// Short pseudo-Chinese utterances for randomized fixtures.
inline std::string random_utterance(std::mt19937& rng) {
  static const std::vector<std::string> kWords = {
      "打开", "关掉", "客厅", "卧室", "空调", "灯",   "窗帘", "温度",
      "音乐", "今天", "天气", "怎么样", "聊聊", "提醒", "我",   "一下"};
  std::uniform_int_distribution<std::size_t> len(1, 5);
  std::uniform_int_distribution<std::size_t> pick(0, kWords.size() - 1);
  std::string out;
  const std::size_t n = len(rng);
  for (std::size_t i = 0; i < n; ++i) {
    out += kWords[pick(rng)];
  }
  return out;
}

}  // namespace homegate::testutil
