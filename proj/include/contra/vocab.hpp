#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace contra {

// Special marker separating the conclusion segment of a joint sequence.
inline constexpr const char* kConclusionMarker = "<conclusion>";
// Special marker separating the counter segment of a joint sequence.
inline constexpr const char* kCounterMarker = "<counter>";

inline constexpr const char* kBos = "<bos>";
inline constexpr const char* kEos = "<eos>";
inline constexpr const char* kUnk = "<unk>";

// FNV-1a over raw bytes; manifests use it to fingerprint configs and inputs.
std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t value);

// Token inventory shared by all sequence models. Ids are dense; the five
// special tokens always occupy ids 0..4 in a fixed order.
class Vocab {
 public:
  Vocab();

  // Adds a token if unseen; returns its id either way.
  int add(const std::string& token);
  // Id of a token, or the <unk> id when absent.
  int id(const std::string& token) const;
  bool contains(const std::string& token) const;
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }

  int bos() const { return bos_; }
  int eos() const { return eos_; }
  int unk() const { return unk_; }
  int conclusion_marker() const { return conclusion_marker_; }
  int counter_marker() const { return counter_marker_; }

  std::vector<int> encode(std::span<const std::string> tokens) const;
  std::vector<std::string> decode(std::span<const int> ids) const;

  // Stable fingerprint of the token list, recorded in checkpoint manifests.
  std::string hash() const;

  void save(const std::filesystem::path& file) const;
  static Vocab load(const std::filesystem::path& file);

  // Builds a vocabulary over every token appearing in the given sequences.
  static Vocab build(const std::vector<std::vector<std::string>>& sequences);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  int bos_, eos_, unk_, conclusion_marker_, counter_marker_;
};

}  // namespace contra
