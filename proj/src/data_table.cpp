#include "bugsmc/data_table.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace bugsmc {

using nlohmann::json;

DataArray DataArray::scalar(double v) { return DataArray{{1}, {v}, {false}}; }

DataArray DataArray::vector(std::vector<double> v) {
  DataArray a;
  a.dims = {v.size()};
  a.missing.assign(v.size(), false);
  a.values = std::move(v);
  return a;
}

DataArray DataArray::matrix(std::size_t rows, std::size_t cols, std::vector<double> row_major) {
  if (row_major.size() != rows * cols) throw Error("matrix data has the wrong number of values");
  DataArray a;
  a.dims = {rows, cols};
  a.missing.assign(row_major.size(), false);
  a.values = std::move(row_major);
  return a;
}

DataArray DataArray::empty(Dims dims) {
  DataArray a;
  const auto n = element_count(dims);
  a.dims = std::move(dims);
  a.values.assign(n, 0.0);
  a.missing.assign(n, true);
  return a;
}

bool DataArray::fully_observed() const {
  for (bool m : missing)
    if (m) return false;
  return true;
}

std::size_t DataArray::offset(const std::vector<long>& index) const {
  if (index.empty() && values.size() == 1) return 0;
  if (index.size() != dims.size())
    throw Error("index has " + std::to_string(index.size()) + " subscripts, array has " +
                std::to_string(dims.size()) + " dimensions");
  std::size_t off = 0;
  for (std::size_t d = 0; d < dims.size(); ++d) {
    if (index[d] < 1 || static_cast<std::size_t>(index[d]) > dims[d])
      throw Error("index " + std::to_string(index[d]) + " out of range 1.." +
                  std::to_string(dims[d]));
    off = off * dims[d] + static_cast<std::size_t>(index[d] - 1);
  }
  return off;
}

void DataTable::set(const std::string& name, DataArray array) {
  if (array.dims.empty()) array.dims = {1};
  for (auto d : array.dims)
    if (d == 0) throw Error("data entry '" + name + "' has a zero extent");
  if (element_count(array.dims) != array.values.size() ||
      array.missing.size() != array.values.size())
    throw Error("data entry '" + name + "': values/mask do not match dims " +
                to_string(array.dims));
  entries_[name] = std::move(array);
}

const DataArray* DataTable::find(const std::string& name) const {
  auto it = entries_.find(name);
  return it == entries_.end() ? nullptr : &it->second;
}

DataArray* DataTable::find(const std::string& name) {
  auto it = entries_.find(name);
  return it == entries_.end() ? nullptr : &it->second;
}

std::pair<std::string, std::vector<long>> parse_element_label(const std::string& label) {
  const auto open = label.find('[');
  if (open == std::string::npos) return {label, {}};
  if (label.back() != ']') throw Error("malformed element name '" + label + "'");
  std::vector<long> index;
  std::stringstream ss(label.substr(open + 1, label.size() - open - 2));
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      index.push_back(std::stol(part, &used));
      while (used < part.size() && part[used] == ' ') ++used;
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw Error("malformed element name '" + label + "'");
    }
  }
  return {label.substr(0, open), index};
}

void DataTable::set_element(const std::string& label, double value) {
  auto [name, index] = parse_element_label(label);
  DataArray* a = find(name);
  if (!a) throw Error("no data entry named '" + name + "'");
  const auto off = a->offset(index);
  a->values[off] = value;
  a->missing[off] = false;
}

std::string DataTable::to_json() const {
  json root = json::object();
  for (const auto& [name, a] : entries_) {
    json entry;
    entry["dim"] = a.dims;
    json values = json::array();
    bool any_missing = false;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
      if (a.missing[i]) {
        values.push_back(nullptr);
        any_missing = true;
      } else {
        values.push_back(a.values[i]);
      }
    }
    entry["values"] = std::move(values);
    if (any_missing) {
      json mask = json::array();
      for (bool m : a.missing) mask.push_back(m);
      entry["mask"] = std::move(mask);
    }
    root[name] = std::move(entry);
  }
  return root.dump(2);
}

namespace {

DataArray array_from_json(const std::string& name, const json& j) {
  DataArray a;
  if (j.is_number()) return DataArray::scalar(j.get<double>());
  json values;
  if (j.is_array()) {
    values = j;
    a.dims = {j.size()};
  } else if (j.is_object()) {
    if (!j.contains("values")) throw Error("data entry '" + name + "' lacks 'values'");
    values = j.at("values");
    a.dims = j.contains("dim") ? j.at("dim").get<Dims>() : Dims{values.size()};
  } else {
    throw Error("data entry '" + name + "' must be a number, array or object");
  }
  if (!values.is_array()) throw Error("data entry '" + name + "': 'values' must be an array");
  a.values.clear();
  a.missing.clear();
  for (const auto& v : values) {
    if (v.is_null()) {
      a.values.push_back(0.0);
      a.missing.push_back(true);
    } else if (v.is_number()) {
      a.values.push_back(v.get<double>());
      a.missing.push_back(false);
    } else {
      throw Error("data entry '" + name + "': values must be numbers or null");
    }
  }
  if (j.is_object() && j.contains("mask")) {
    const auto& mask = j.at("mask");
    if (!mask.is_array() || mask.size() != a.values.size())
      throw Error("data entry '" + name + "': mask length differs from values");
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask[i].get<bool>()) a.missing[i] = true;
  }
  return a;
}

}  // namespace

DataTable DataTable::from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("invalid data JSON: ") + e.what());
  }
  if (!root.is_object()) throw Error("data JSON must be an object");
  DataTable t;
  try {
    for (const auto& [name, j] : root.items()) t.set(name, array_from_json(name, j));
  } catch (const json::exception& e) {
    throw Error(std::string("invalid data JSON: ") + e.what());
  }
  return t;
}

DataTable DataTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open data file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

void DataTable::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write data file '" + path + "'");
  out << to_json() << '\n';
}

}  // namespace bugsmc
