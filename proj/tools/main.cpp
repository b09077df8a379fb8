#include "auditcalib/report.hpp"

int main(int argc, char** argv) { return auditcalib::report::cli_main(argc, argv); }
