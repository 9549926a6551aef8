#pragma once

#include <stdexcept>
#include <string>

namespace dimbid {

// Error categories map 1:1 onto CLI exit codes (usage=1, data=2, solver=3).
enum class ErrorKind { usage, data, solver };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline Error usage_error(const std::string& what) { return Error(ErrorKind::usage, what); }
inline Error data_error(const std::string& what) { return Error(ErrorKind::data, what); }
inline Error solver_error(const std::string& what) { return Error(ErrorKind::solver, what); }

}  // namespace dimbid
