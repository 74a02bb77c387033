#pragma once

#include <stdexcept>
#include <string>

namespace saba {

// Error classes map 1:1 onto documented CLI exit codes.
enum class ErrorClass {
    StructuralValidation,
    LinkError,
    IdCollision,
    FusionParse,
    QsrParse,
    BackendUnavailable,
    MissingFixture,
    InputValidation,
    DatasetValidation,
    AdapterError,
    SequencingError,
    StorageError,
    Incomparable,
    DivisionError,
    EmptyInput,
};

inline const char* to_string(ErrorClass c) {
    switch (c) {
        case ErrorClass::StructuralValidation: return "structural-validation";
        case ErrorClass::LinkError:            return "link";
        case ErrorClass::IdCollision:          return "id-collision";
        case ErrorClass::FusionParse:          return "fusion-parse";
        case ErrorClass::QsrParse:             return "qsr-parse";
        case ErrorClass::BackendUnavailable:   return "backend-unavailable";
        case ErrorClass::MissingFixture:       return "missing-fixture";
        case ErrorClass::InputValidation:      return "input-validation";
        case ErrorClass::DatasetValidation:    return "dataset-validation";
        case ErrorClass::AdapterError:         return "adapter";
        case ErrorClass::SequencingError:      return "sequencing";
        case ErrorClass::StorageError:         return "storage";
        case ErrorClass::Incomparable:         return "incomparable";
        case ErrorClass::DivisionError:        return "division";
        case ErrorClass::EmptyInput:           return "empty-input";
    }
    return "unknown";
}

// Stable exit-code mapping; 0 = success, 1 = unexpected, 2 = usage.
inline int exit_code_for(ErrorClass c) {
    switch (c) {
        case ErrorClass::StructuralValidation: return 10;
        case ErrorClass::LinkError:            return 11;
        case ErrorClass::IdCollision:          return 12;
        case ErrorClass::FusionParse:          return 13;
        case ErrorClass::QsrParse:             return 14;
        case ErrorClass::BackendUnavailable:   return 15;
        case ErrorClass::MissingFixture:       return 16;
        case ErrorClass::InputValidation:      return 17;
        case ErrorClass::DatasetValidation:    return 18;
        case ErrorClass::SequencingError:      return 19;
        case ErrorClass::StorageError:         return 20;
        case ErrorClass::Incomparable:         return 21;
        case ErrorClass::AdapterError:         return 22;
        case ErrorClass::DivisionError:        return 23;
        case ErrorClass::EmptyInput:           return 24;
    }
    return 1;
}

class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, const std::string& message)
        : std::runtime_error(std::string(to_string(cls)) + " error: " + message),
          cls_(cls),
          message_(message) {}

    ErrorClass error_class() const { return cls_; }
    int exit_code() const { return exit_code_for(cls_); }
    // The message without the class prefix that what() carries.
    const std::string& message() const { return message_; }

private:
    ErrorClass cls_;
    std::string message_;
};

} // namespace saba
