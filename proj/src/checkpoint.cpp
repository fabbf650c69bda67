/* Copyright 2026 The MetaLSTM Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "metalstm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace metalstm {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are little-endian");

namespace {

constexpr char kMagic[8] = {'M', 'L', 'S', 'T', 'M', 'C', 'P', '1'};

class Writer {
 public:
  void u32(std::uint32_t v) { raw(&v, sizeof(v)); }
  void u64(std::uint64_t v) { raw(&v, sizeof(v)); }
  void f64(double v) { raw(&v, sizeof(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void raw(const void* data, std::size_t len) {
    const char* p = static_cast<const char*>(data);
    bytes_.insert(bytes_.end(), p, p + len);
  }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class Reader {
 public:
  Reader(const char* data, std::size_t len) : data_(data), len_(len) {}

  std::uint32_t u32() {
    std::uint32_t v = 0;
    raw(&v, sizeof(v));
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    raw(&v, sizeof(v));
    return v;
  }
  double f64() {
    double v = 0;
    raw(&v, sizeof(v));
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    if (n > remaining()) {
      throw CheckpointError("checkpoint: truncated string");
    }
    std::string s(data_ + at_, n);
    at_ += n;
    return s;
  }
  void raw(void* out, std::size_t len) {
    if (len > remaining()) {
      throw CheckpointError("checkpoint: truncated file");
    }
    std::memcpy(out, data_ + at_, len);
    at_ += len;
  }
  std::size_t remaining() const { return len_ - at_; }
  std::size_t position() const { return at_; }

 private:
  const char* data_;
  std::size_t len_;
  std::size_t at_ = 0;
};

}  // namespace

const Matrix* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, m] : tensors) {
    if (n == name) {
      return &m;
    }
  }
  return nullptr;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.u32(static_cast<std::uint32_t>(ckpt.header.d));
  w.u32(static_cast<std::uint32_t>(ckpt.header.h));
  w.u32(static_cast<std::uint32_t>(ckpt.header.m));
  w.u32(static_cast<std::uint32_t>(ckpt.header.z));
  w.str(ckpt.header.arch);
  w.u64(ckpt.header.vocab_hash);
  w.u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, tensor] : ckpt.tensors) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(tensor.rows()));
    w.u32(static_cast<std::uint32_t>(tensor.cols()));
    for (Eigen::Index r = 0; r < tensor.rows(); ++r) {
      for (Eigen::Index c = 0; c < tensor.cols(); ++c) {
        w.f64(tensor(r, c));
      }
    }
  }
  const std::uint64_t checksum = fnv1a(w.bytes().data(), w.bytes().size());
  Writer footer;
  footer.u64(checksum);

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw CheckpointError("checkpoint: cannot open '" + tmp +
                            "' for writing");
    }
    out.write(w.bytes().data(),
              static_cast<std::streamsize>(w.bytes().size()));
    out.write(footer.bytes().data(),
              static_cast<std::streamsize>(footer.bytes().size()));
    if (!out) {
      throw CheckpointError("checkpoint: write failed for '" + tmp + "'");
    }
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CheckpointError("checkpoint: cannot open '" + path + "'");
  }
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  if (bytes.size() < sizeof(kMagic) + sizeof(std::uint64_t)) {
    throw CheckpointError("checkpoint: file too small");
  }

  const std::size_t body_len = bytes.size() - sizeof(std::uint64_t);
  std::uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + body_len, sizeof(stored));
  const std::uint64_t computed = fnv1a(bytes.data(), body_len);
  if (stored != computed) {
    throw CheckpointError("checkpoint: checksum mismatch in '" + path + "'");
  }

  Reader r(bytes.data(), body_len);
  char magic[sizeof(kMagic)];
  r.raw(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("checkpoint: bad magic in '" + path + "'");
  }
  Checkpoint ckpt;
  ckpt.header.d = static_cast<std::int32_t>(r.u32());
  ckpt.header.h = static_cast<std::int32_t>(r.u32());
  ckpt.header.m = static_cast<std::int32_t>(r.u32());
  ckpt.header.z = static_cast<std::int32_t>(r.u32());
  ckpt.header.arch = r.str();
  ckpt.header.vocab_hash = r.u64();
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str();
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    Matrix tensor(rows, cols);
    for (std::uint32_t rr = 0; rr < rows; ++rr) {
      for (std::uint32_t cc = 0; cc < cols; ++cc) {
        tensor(rr, cc) = r.f64();
      }
    }
    ckpt.tensors.emplace_back(name, std::move(tensor));
  }
  if (r.remaining() != 0) {
    throw CheckpointError("checkpoint: trailing bytes in '" + path + "'");
  }
  return ckpt;
}

namespace {

CheckpointHeader header_of(const MultiTaskModel& model,
                           std::uint64_t vocab_hash) {
  CheckpointHeader h;
  h.d = model.cfg.d;
  h.h = model.cfg.h;
  h.m = model.cfg.m;
  h.z = model.cfg.z;
  h.arch = architecture_name(model.arch);
  h.vocab_hash = vocab_hash;
  return h;
}

}  // namespace

Checkpoint checkpoint_from_model(const MultiTaskModel& model,
                                 std::uint64_t vocab_hash) {
  Checkpoint ckpt;
  ckpt.header = header_of(model, vocab_hash);
  for (const auto& name : model.shared.names()) {
    ckpt.tensors.emplace_back("shared/" + name, model.shared.value(name));
  }
  for (const auto& task_id : model.task_ids) {
    const ParamStore& store = model.privates.at(task_id);
    for (const auto& name : store.names()) {
      ckpt.tensors.emplace_back("task/" + task_id + "/" + name,
                                store.value(name));
    }
  }
  return ckpt;
}

Checkpoint meta_checkpoint_from_model(const MultiTaskModel& model,
                                      std::uint64_t vocab_hash) {
  if (model.arch != Architecture::kMetaMTL) {
    throw CheckpointError(
        "meta checkpoint: model does not share a meta network");
  }
  Checkpoint ckpt;
  ckpt.header = header_of(model, vocab_hash);
  for (const auto& name : model.shared.names()) {
    if (name.rfind("meta.", 0) == 0) {
      ckpt.tensors.emplace_back(name, model.shared.value(name));
    }
  }
  return ckpt;
}

void restore_model(MultiTaskModel& model, const Checkpoint& ckpt) {
  for (const auto& [name, tensor] : ckpt.tensors) {
    ParamStore* store = nullptr;
    std::string local;
    if (name.rfind("shared/", 0) == 0) {
      store = &model.shared;
      local = name.substr(7);
    } else if (name.rfind("task/", 0) == 0) {
      const auto slash = name.find('/', 5);
      if (slash == std::string::npos) {
        throw CheckpointError("checkpoint: malformed tensor name '" + name +
                              "'");
      }
      store = &model.task_store(name.substr(5, slash - 5));
      local = name.substr(slash + 1);
    } else {
      throw CheckpointError("checkpoint: unexpected tensor name '" + name +
                            "' in a full checkpoint");
    }
    if (!store->has(local)) {
      throw CheckpointError("checkpoint: model has no tensor '" + name + "'");
    }
    Matrix& dst = store->value(local);
    if (dst.rows() != tensor.rows() || dst.cols() != tensor.cols()) {
      throw CheckpointError(
          "checkpoint: shape mismatch for '" + name + "': expected " +
          std::to_string(dst.rows()) + "x" + std::to_string(dst.cols()) +
          ", found " + std::to_string(tensor.rows()) + "x" +
          std::to_string(tensor.cols()));
    }
    dst = tensor;
  }
}

std::uint64_t store_hash(const ParamStore& store,
                         const std::string& name_prefix) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& name : store.names()) {
    if (!name_prefix.empty() && name.rfind(name_prefix, 0) != 0) {
      continue;
    }
    h = fnv1a(name.data(), name.size(), h);
    const Matrix& v = store.value(name);
    h = fnv1a(v.data(), sizeof(double) * static_cast<std::size_t>(v.size()),
              h);
  }
  return h;
}

}  // namespace metalstm
