from etlc.harness.cli import main

raise SystemExit(main())
