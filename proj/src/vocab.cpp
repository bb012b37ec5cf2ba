#include "contra/vocab.hpp"

#include <fstream>

#include "contra/errors.hpp"
#include "nlohmann/json.hpp"

namespace contra {

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[value & 0xF];
    value >>= 4;
  }
  return out;
}

Vocab::Vocab() {
  bos_ = add(kBos);
  eos_ = add(kEos);
  unk_ = add(kUnk);
  conclusion_marker_ = add(kConclusionMarker);
  counter_marker_ = add(kCounterMarker);
}

int Vocab::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

int Vocab::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? unk_ : it->second;
}

bool Vocab::contains(const std::string& token) const {
  return index_.count(token) > 0;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size()) throw PreconditionError("token id out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocab::encode(std::span<const std::string> tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& tok : tokens) ids.push_back(id(tok));
  return ids;
}

std::vector<std::string> Vocab::decode(std::span<const int> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(token(i));
  return out;
}

std::string Vocab::hash() const {
  std::string joined;
  for (const auto& tok : tokens_) {
    joined += tok;
    joined += '\n';
  }
  return hex64(fnv1a(joined));
}

void Vocab::save(const std::filesystem::path& file) const {
  nlohmann::json j = tokens_;
  std::ofstream out(file);
  if (!out) throw Error("cannot write vocabulary file: " + file.string());
  out << j.dump() << '\n';
}

Vocab Vocab::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot read vocabulary file: " + file.string());
  nlohmann::json j;
  in >> j;
  Vocab vocab;
  for (const auto& tok : j) {
    vocab.add(tok.get<std::string>());
  }
  return vocab;
}

Vocab Vocab::build(const std::vector<std::vector<std::string>>& sequences) {
  Vocab vocab;
  for (const auto& seq : sequences) {
    for (const auto& tok : seq) vocab.add(tok);
  }
  return vocab;
}

}  // namespace contra
