#include "safeval/backends.hpp"

#include "safeval/errors.hpp"

namespace safeval {

const char* to_string(BackendKind kind) {
    switch (kind) {
        case BackendKind::qa: return "qa";
        case BackendKind::qg: return "qg";
        case BackendKind::weighter: return "weighter";
        case BackendKind::annotator: return "annotator";
    }
    return "?";
}

const char* to_string(BackendImpl impl) {
    switch (impl) {
        case BackendImpl::fixture: return "fixture";
        case BackendImpl::remote: return "remote";
        case BackendImpl::uniform: return "uniform";
        case BackendImpl::model: return "model";
    }
    return "?";
}

BackendKind backend_kind_from_string(const std::string& name) {
    if (name == "qa") return BackendKind::qa;
    if (name == "qg") return BackendKind::qg;
    if (name == "weighter") return BackendKind::weighter;
    if (name == "annotator") return BackendKind::annotator;
    throw InputError("unknown backend kind: " + name);
}

BackendImpl backend_impl_from_string(const std::string& name) {
    if (name == "fixture") return BackendImpl::fixture;
    if (name == "remote") return BackendImpl::remote;
    if (name == "uniform") return BackendImpl::uniform;
    if (name == "model") return BackendImpl::model;
    throw InputError("unknown backend implementation: " + name);
}

void BackendDescriptor::validate() const {
    const std::string label =
        std::string(to_string(kind)) + "/" + to_string(implementation);
    switch (implementation) {
        case BackendImpl::remote:
            if (endpoint.empty()) {
                throw InputError("backend " + label + " requires an endpoint");
            }
            break;
        case BackendImpl::fixture:
        case BackendImpl::model:
            if (fixture_path.empty()) {
                throw InputError("backend " + label + " requires a fixture_path");
            }
            break;
        case BackendImpl::uniform:
            break;
    }
    if (implementation == BackendImpl::uniform && kind != BackendKind::weighter) {
        throw InputError("uniform implementation is only valid for the weighter");
    }
    if (implementation == BackendImpl::model && kind != BackendKind::weighter) {
        throw InputError("model implementation is only valid for the weighter");
    }
}

}  // namespace safeval
