#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace msw {

// Base for every diagnostic raised by the toolchain.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Gate model.
class ShapeError : public Error { using Error::Error; };
class LineError : public Error { using Error::Error; };
class ArgumentError : public Error { using Error::Error; };
class ModelError : public Error { using Error::Error; };

// ISA.
class EncodingError : public Error { using Error::Error; };
class DecodeError : public Error { using Error::Error; };

class AssemblyError : public Error {
public:
    AssemblyError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Compiler.
class SyntaxError : public Error {
public:
    SyntaxError(std::size_t line, std::size_t col, const std::string& what)
        : Error(std::to_string(line) + ":" + std::to_string(col) + ": " + what),
          line_(line), col_(col) {}
    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return col_; }

private:
    std::size_t line_;
    std::size_t col_;
};

class NameError : public Error { using Error::Error; };
class CompileError : public Error { using Error::Error; };
class CapacityError : public Error { using Error::Error; };

// Machine.
class LoadError : public Error { using Error::Error; };
class NotReadyError : public Error { using Error::Error; };

class VmTrap : public Error {
public:
    VmTrap(int thread, std::size_t address, const std::string& what)
        : Error("trap in thread " + std::to_string(thread) + " at address " +
                std::to_string(address) + ": " + what),
          thread_(thread), address_(address) {}
    int thread() const noexcept { return thread_; }
    std::size_t address() const noexcept { return address_; }

private:
    int thread_;
    std::size_t address_;
};

// Applications.
class SpecError : public Error { using Error::Error; };
class UpdateError : public Error { using Error::Error; };
class SearchError : public Error { using Error::Error; };

}  // namespace msw
