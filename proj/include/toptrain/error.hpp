#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace toptrain {

// Base for every error the toolkit raises.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input file. `offset` is the byte position reported by the parser.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(what + " (byte " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

// Content that parsed but violates a data invariant; carries the offending ids.
class ValidationError : public Error {
public:
    ValidationError(const std::string& what, std::vector<std::string> ids = {})
        : Error(format(what, ids)), ids_(std::move(ids)) {}
    const std::vector<std::string>& ids() const noexcept { return ids_; }

private:
    static std::string format(const std::string& what, const std::vector<std::string>& ids) {
        if (ids.empty()) return what;
        std::string out = what + ":";
        const std::size_t shown = ids.size() < 20 ? ids.size() : 20;
        for (std::size_t i = 0; i < shown; ++i) out += " " + ids[i];
        if (shown < ids.size()) out += " ... (" + std::to_string(ids.size()) + " total)";
        return out;
    }
    std::vector<std::string> ids_;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

// Bad configuration; `field` names the offending key when known.
class ConfigError : public Error {
public:
    ConfigError(const std::string& field, const std::string& what)
        : Error(field.empty() ? what : field + ": " + what), field_(field) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

// A backend could not be reached or the exchange broke mid-way.
class TransportError : public Error {
public:
    TransportError(const std::string& what, std::string doc_id = {})
        : Error(doc_id.empty() ? what : what + " [doc " + doc_id + "]"), doc_id_(std::move(doc_id)) {}
    const std::string& doc_id() const noexcept { return doc_id_; }

private:
    std::string doc_id_;
};

// A backend answered, but the answer breaks the wire contract.
class ProtocolError : public Error {
public:
    using Error::Error;
};

}  // namespace toptrain
