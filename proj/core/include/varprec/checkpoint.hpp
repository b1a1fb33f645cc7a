#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "varprec/optimizer.hpp"
#include "varprec/tensor.hpp"

namespace varprec::checkpoint {

// Named-tensor container with a JSON manifest. Records hold the trainable
// parameters, state buffers, and any extra constant arrays a model needs to
// reproduce its predictions.
struct Record {
  std::string name;
  enum class Kind : unsigned char { Param = 0, Buffer = 1, Extra = 2 } kind;
  nd::Shape shape;
  std::vector<double> values;
};

struct Container {
  std::string manifest_json;
  std::vector<Record> records;

  const Record* find(const std::string& name) const;
};

void save(const std::string& path, const std::string& manifest_json, const nd::ParamStore& store,
          const std::vector<std::pair<std::string, nd::Tensor>>& extras = {});

Container load(const std::string& path);

// copies matching parameter/buffer records back into the store; throws if a
// registered name is missing or shaped differently
void restore_into(nd::ParamStore& store, const Container& c);

}  // namespace varprec::checkpoint
