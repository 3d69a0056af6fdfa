use std::net::TcpListener;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::ckks::CkksParams;
use crate::hebackend::Backend;
use crate::Error;

fn td_params() -> CkksParams {
    static P: OnceLock<CkksParams> = OnceLock::new();
    P.get_or_init(|| CkksParams::generate(4096, 60, 2, 40, 60).unwrap())
        .clone()
}

fn z_params() -> CkksParams {
    static P: OnceLock<CkksParams> = OnceLock::new();
    P.get_or_init(|| CkksParams::generate(4096, 60, 4, 40, 60).unwrap())
        .clone()
}

fn pair(params: CkksParams, seed: u64, privacy: bool) -> (Client, Cloud) {
    let client = Client::new(params, seed).unwrap();
    let cloud = Cloud::new(
        client.context().clone(),
        client.setup(privacy).evaluation,
        privacy,
    )
    .unwrap();
    (client, cloud)
}

fn exact_td(x: &TdInputs) -> f64 {
    let mut b = Backend::exact();
    let v: Vec<_> = [x.value, x.next_value, x.alpha, x.gamma, x.reward]
        .iter()
        .map(|&y| b.encrypt(y).unwrap())
        .collect();
    let out = td_circuit(&mut b, &v[0], &v[1], &v[2], &v[3], &v[4]).unwrap();
    b.decrypt(&out).unwrap()
}

fn random_td(rng: &mut ChaCha8Rng) -> TdInputs {
    TdInputs {
        value: rng.gen_range(-10.0..10.0),
        next_value: rng.gen_range(-10.0..10.0),
        alpha: rng.gen_range(0.0..=1.0),
        gamma: 0.9,
        reward: rng.gen_range(-1.0..1.0),
    }
}

#[test]
fn request_role_counts() {
    let (mut client, _) = pair(td_params(), 1, false);
    let x = TdInputs {
        value: 0.0,
        next_value: 1.0,
        alpha: 0.5,
        gamma: 0.9,
        reward: 1.0,
    };
    assert_eq!(client.prepare_td(Rule::Td0, &x).unwrap().roles.len(), 5);
    let z = ZInputs {
        value: 1.0,
        next_value: 1.0,
        alpha: 0.5,
        cost: 0.1,
    };
    let req = client.prepare_z(&z, 5).unwrap();
    let kinds: Vec<_> = req.roles.iter().map(|(r, _)| r.kind).collect();
    assert_eq!(
        kinds,
        [
            RoleKind::Value,
            RoleKind::NextValue,
            RoleKind::Alpha,
            RoleKind::Cost
        ]
    );
    assert!(client.prepare_td(Rule::Z, &x).is_err());
}

#[test]
fn prepared_roles_decrypt_to_their_sources() {
    let (mut client, _) = pair(td_params(), 2, false);
    let x = TdInputs {
        value: -3.25,
        next_value: 7.5,
        alpha: 0.125,
        gamma: 0.9,
        reward: -0.05,
    };
    let req = client.prepare_td(Rule::Sarsa, &x).unwrap();
    let want = [x.value, x.next_value, x.alpha, x.gamma, x.reward];
    for ((_, ct), w) in req.roles.iter().zip(want) {
        let got = client.decrypt_values(ct).unwrap()[0];
        assert!((got - w).abs() <= ct.noise_epsilon());
    }
}

#[test]
fn td_step_matches_exact_and_consumes_declared_depth() {
    let (mut client, cloud) = pair(td_params(), 3, false);
    let x = TdInputs {
        value: 0.0,
        next_value: 1.0,
        alpha: 0.5,
        gamma: 0.9,
        reward: 1.0,
    };
    let req = client.prepare_td(Rule::Td0, &x).unwrap();
    let resp = cloud.evaluate(&req).unwrap();
    assert_eq!(resp.id, req.id);
    assert_eq!(resp.levels_consumed as usize, Rule::Td0.depth(0));
    let out = client.finalize(&resp).unwrap();
    assert!((out.value() - 0.95).abs() <= out.epsilon);
    assert!(out.epsilon < 1e-4, "epsilon {}", out.epsilon);
    assert_eq!(client.outstanding(), 0);
    assert!(client.finalize(&resp).is_err());
}

#[test]
fn randomized_td_requests_stay_within_epsilon() {
    let (mut client, cloud) = pair(td_params(), 4, false);
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    for _ in 0..200 {
        let x = random_td(&mut rng);
        let resp = cloud
            .evaluate(&client.prepare_td(Rule::Td0, &x).unwrap())
            .unwrap();
        let out = client.finalize(&resp).unwrap();
        assert!((out.value() - exact_td(&x)).abs() <= out.epsilon);
    }
}

#[test]
fn z_step_matches_taylor_form() {
    let (mut client, cloud) = pair(z_params(), 5, false);
    let ln2 = std::f64::consts::LN_2;
    let x = ZInputs {
        value: 1.0,
        next_value: 2.0,
        alpha: 1.0,
        cost: ln2,
    };
    let resp = cloud.evaluate(&client.prepare_z(&x, 5).unwrap()).unwrap();
    assert_eq!(resp.levels_consumed as usize, Rule::Z.depth(5));
    let out = client.finalize(&resp).unwrap();
    let want = taylor_exp(-ln2, 5, 1.0).unwrap() * 2.0;
    assert!((out.value() - want).abs() <= out.epsilon);
    assert!((out.value() - 1.0).abs() <= out.epsilon + 2.0 * taylor_remainder(5, ln2));

    // the TD chain is too short for this circuit
    let (mut client, cloud) = pair(td_params(), 5, false);
    let err = cloud
        .evaluate(&client.prepare_z(&x, 5).unwrap())
        .unwrap_err();
    assert!(matches!(err, Error::DepthExhausted { .. }));
}

#[test]
fn backup_row_and_greedy_action() {
    let (mut client, cloud) = pair(td_params(), 6, false);
    let succ = [
        Successor {
            probs: vec![1.0, 0.5, 0.0],
            rewards: vec![0.0, 0.0, 0.0],
            value: 1.0,
        },
        Successor {
            probs: vec![0.0, 0.5, 1.0],
            rewards: vec![1.0, 1.0, 1.0],
            value: 1.0,
        },
    ];
    let req = client.prepare_backup(0.9, &succ).unwrap();
    assert_eq!(req.roles.len(), 7);
    let out = client.finalize(&cloud.evaluate(&req).unwrap()).unwrap();
    let want = [0.9, 1.4, 1.9];
    assert_eq!(out.values.len(), 3);
    for (g, w) in out.values.iter().zip(want) {
        assert!((g - w).abs() <= out.epsilon);
    }
    assert_eq!(out.greedy_action(), 2);
    let tie = Decrypted {
        rule: Rule::QBackup,
        values: vec![1.0, 3.0, 3.0],
        epsilon: 0.0,
        levels_consumed: 2,
    };
    assert_eq!(tie.greedy_action(), 1);
}

#[test]
fn malformed_role_sets_are_rejected() {
    let (mut client, cloud) = pair(td_params(), 7, false);
    let x = TdInputs {
        value: 0.0,
        next_value: 1.0,
        alpha: 0.5,
        gamma: 0.9,
        reward: 1.0,
    };
    let mut req = client.prepare_td(Rule::Td0, &x).unwrap();
    req.roles.pop();
    assert!(matches!(cloud.evaluate(&req), Err(Error::Protocol(_))));
    let mut req = client.prepare_td(Rule::Td0, &x).unwrap();
    let dup = req.roles[0].clone();
    req.roles.push(dup);
    assert!(matches!(cloud.evaluate(&req), Err(Error::Protocol(_))));
    let mut req = client.prepare_td(Rule::Td0, &x).unwrap();
    req.rule = Rule::Z;
    assert!(matches!(cloud.evaluate(&req), Err(Error::Protocol(_))));
}

#[test]
fn messages_round_trip_and_reject_corruption() {
    let (mut client, cloud) = pair(td_params(), 8, false);
    let ctx = client.context().clone();
    let x = TdInputs {
        value: 0.5,
        next_value: -1.0,
        alpha: 0.25,
        gamma: 0.9,
        reward: 0.1,
    };
    let req = client.prepare_td(Rule::Td0, &x).unwrap();
    let bytes = req.to_bytes();
    let back = ClientRequest::from_bytes(&ctx, &bytes).unwrap();
    assert_eq!(back, req);
    assert_eq!(back.to_bytes(), bytes);

    let resp = cloud.evaluate(&req).unwrap();
    let rb = resp.to_bytes();
    assert_eq!(CloudResponse::from_bytes(&ctx, &rb).unwrap(), resp);
    assert!(matches!(
        ClientRequest::from_bytes(&ctx, &rb),
        Err(Error::Protocol(_))
    ));

    for cut in [0, 10, 27, bytes.len() / 2, bytes.len() - 1] {
        let err = ClientRequest::from_bytes(&ctx, &bytes[..cut]).unwrap_err();
        assert!(
            matches!(err, Error::Framing(_) | Error::Checksum),
            "cut {cut}: {err:?}"
        );
    }
    let mut flipped = bytes.clone();
    flipped[100] ^= 1;
    assert!(matches!(
        ClientRequest::from_bytes(&ctx, &flipped),
        Err(Error::Checksum)
    ));
    let mut versioned = bytes.clone();
    versioned[4] = 9;
    assert!(matches!(
        ClientRequest::from_bytes(&ctx, &versioned),
        Err(Error::VersionMismatch(9))
    ));
}

#[test]
fn setup_round_trip() {
    let client = Client::new(td_params(), 9).unwrap();
    let setup = client.setup(true);
    let bytes = setup.to_bytes();
    let back = SetupMessage::from_bytes(&bytes).unwrap();
    assert_eq!(back, setup);
    assert!(back.circuit_privacy);
    let mut bad = bytes.clone();
    bad[40] ^= 0xff;
    assert!(SetupMessage::from_bytes(&bad).is_err());
}

#[test]
fn circuit_privacy_keeps_results() {
    let (mut plain_client, plain) = pair(td_params(), 10, false);
    let (mut padded_client, padded) = pair(td_params(), 10, true);
    let x = TdInputs {
        value: 2.0,
        next_value: -1.0,
        alpha: 0.3,
        gamma: 0.9,
        reward: 0.4,
    };
    let req = plain_client.prepare_td(Rule::Td0, &x).unwrap();
    let a = plain_client
        .finalize(&plain.evaluate(&req).unwrap())
        .unwrap();
    let req = padded_client.prepare_td(Rule::Td0, &x).unwrap();
    let b = padded_client
        .finalize(&padded.evaluate(&req).unwrap())
        .unwrap();
    assert_eq!(a.values, b.values);
    assert_eq!(b.levels_consumed, 2);
}

#[test]
fn loopback_matches_in_process() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let server = std::thread::spawn(move || serve(&listener, Some(1)));

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let inputs: Vec<TdInputs> = (0..20).map(|_| random_td(&mut rng)).collect();

    let mut local = Client::new(td_params(), 12).unwrap();
    let mut in_process = InProcess::new(Cloud::from_setup(&local.setup(false)).unwrap(), true);
    let mut remote = Client::new(td_params(), 12).unwrap();
    {
        let mut tcp =
            TcpTransport::connect(addr, &remote.setup(false), remote.context().clone()).unwrap();
        for x in &inputs {
            let a = local.prepare_td(Rule::Td0, x).unwrap();
            let a = local.finalize(&in_process.call(&a).unwrap()).unwrap();
            let b = remote.prepare_td(Rule::Td0, x).unwrap();
            let b = remote.finalize(&tcp.call(&b).unwrap()).unwrap();
            assert_eq!(a, b);
        }
        let mut bad = remote.prepare_td(Rule::Td0, &inputs[0]).unwrap();
        bad.roles.pop();
        assert!(matches!(tcp.call(&bad), Err(Error::Protocol(_))));
    }
    server.join().unwrap().unwrap();
}

#[test]
fn framing() {
    let mut buf = Vec::new();
    write_frame(&mut buf, b"abc").unwrap();
    write_frame(&mut buf, b"").unwrap();
    let mut r = &buf[..];
    assert_eq!(read_frame(&mut r).unwrap().unwrap(), b"abc");
    assert_eq!(read_frame(&mut r).unwrap().unwrap(), b"");
    assert!(read_frame(&mut r).unwrap().is_none());
    let mut short = &buf[..5];
    assert!(matches!(read_frame(&mut short), Err(Error::Framing(_))));
}
