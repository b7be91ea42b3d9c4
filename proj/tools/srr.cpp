#include "srr/app.hpp"

int main(int argc, char** argv) { return srr::app::run_cli(argc, argv); }
