//! EDF with rate caps, the CBS server for aperiodic jobs, and admission.

use rtbdi::rational::Rational;
use rtbdi::rt::{admit, edf_dispatch, CbsServer, Job, RtTask, ScheduleTrace, Scheduler};

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

fn main() {
    // Two jobs released together: B has the earlier deadline and runs first.
    let job = |id: &str, cost, deadline| Job {
        task_id: id.into(),
        release: 0,
        remaining: Rational::from_integer(cost),
        absolute_deadline: deadline,
        rate: q(1, 1),
    };
    let mut jobs = vec![job("A", 4, 8), job("B", 3, 5)];
    let mut trace = ScheduleTrace::default();
    for t in 0..8 {
        trace.records.push(edf_dispatch(&mut jobs, &mut [], q(1, 1), t));
    }
    print!("{}", trace.to_csv());
    println!("misses: {}", trace.misses().count());

    // Intentions reserve a rate over an interval; system work goes through
    // the server and never takes more than its budget per period.
    let mut s = Scheduler::new(q(1, 1), CbsServer::system());
    s.add_task(RtTask::periodic("I1/0", "I1", 0, 30, q(9, 10)));
    s.submit_aperiodic(RtTask::aperiodic("plan", "system", 0, q(1, 2), 40, q(1, 1)), 0);
    for t in 0..30 {
        let rec = s.step(t);
        if t % 10 == 0 {
            println!("tick {t}: load {}", rec.load());
        }
    }
    println!("intention capacity {}", s.intention_capacity());

    let active = [RtTask::periodic("I1/0", "I1", 0, 100, q(3, 5))];
    let fits = [RtTask::periodic("I2/0", "I2", 100, 200, q(3, 5))];
    let clash = [RtTask::periodic("I2/0", "I2", 50, 200, q(3, 5))];
    println!("{:?}", admit(&active, &fits, q(1, 1)));
    println!("{:?}", admit(&active, &clash, q(1, 1)));
}
