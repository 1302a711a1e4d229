// Scripted trainer for protocol tests.
//
//   stub_trainer echo [fitness]      reply OK with a fixed fitness (default 0.5)
//   stub_trainer final <test_acc>    reply OK with metrics.test_accuracy
//   stub_trainer malformed           reply with a line that is not JSON
//   stub_trainer crash               exit after reading the request
//   stub_trainer hang                never reply
//   stub_trainer silent              never send the hello line
//   stub_trainer version             announce an unsupported protocol version
//   stub_trainer stale [fitness]     send an unrelated reply before the real one
//   stub_trainer reject              reply ERROR for every request
//   stub_trainer log FILE [fitness]  like echo, appending each request line to FILE

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>

#include "chainnas/evaluator.hpp"

using namespace chainnas;

int main(int argc, char** argv)
{
    const std::string mode = argc > 1 ? argv[1] : "echo";
    if (mode == "silent") {
        std::this_thread::sleep_for(std::chrono::hours(1));
        return 0;
    }
    if (mode == "version")
        std::cout << "{\"hello\":\"stub\",\"protocol\":99}" << std::endl;
    else
        std::cout << encode_hello() << std::endl;

    std::string line;
    while (std::getline(std::cin, line)) {
        if (line.empty())
            continue;
        if (mode == "crash")
            return 3;
        if (mode == "hang") {
            std::this_thread::sleep_for(std::chrono::hours(1));
            return 0;
        }
        if (mode == "malformed") {
            std::cout << "this is not a result" << std::endl;
            continue;
        }
        EvaluationRequest request;
        try {
            request = decode_request(line);
        } catch (const std::exception& e) {
            std::cout << encode_result(EvaluationResult::failure("?", EvalErrorKind::BackendFailure, e.what()))
                      << std::endl;
            continue;
        }
        if (mode == "reject") {
            std::cout << encode_result(EvaluationResult::failure(request.id, EvalErrorKind::BackendFailure,
                                                                 "rejected by stub"))
                      << std::endl;
            continue;
        }
        double fitness = 0.5;
        if (mode == "log") {
            std::ofstream(argv[2], std::ios::app) << line << "\n";
            if (argc > 3)
                fitness = std::atof(argv[3]);
        } else if ((mode == "echo" || mode == "stale") && argc > 2) {
            fitness = std::atof(argv[2]);
        }
        auto result = EvaluationResult::success(request.id, fitness);
        result.metrics["epochs"] = request.budget.epochs;
        if (mode == "final")
            result.metrics["test_accuracy"] = argc > 2 ? std::atof(argv[2]) : 0.9;
        if (mode == "stale")
            std::cout << encode_result(EvaluationResult::success("not-" + request.id, 0.0)) << std::endl;
        std::cout << encode_result(result) << std::endl;
    }
    return 0;
}
